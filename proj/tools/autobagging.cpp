// autobagging command-line entry point: ingest -> build -> train -> rank / benchmark.

#include "autobagging/pipeline.hpp"
#include "autobagging/synthetic.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace autobagging;

namespace {

struct Flags {
    std::string config_file, manifest, out;
    std::uint64_t seed = 0;
    int folds = 0, map_k = 0, rounds = 0, depth = 0;
    unsigned workers = 0;
    double alpha = 0, eta = 0;
};

struct Options {
    CLI::Option *manifest, *out, *seed, *folds, *workers, *map_k, *alpha, *rounds, *depth, *eta;
};

Options add_common(CLI::App& app, Flags& f)
{
    app.add_option("--config", f.config_file, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    Options o{};
    o.manifest = app.add_option("--manifest", f.manifest, "dataset manifest (JSON)");
    o.out = app.add_option("--out", f.out, "output directory");
    o.seed = app.add_option("--seed", f.seed, "master seed (required)");
    o.folds = app.add_option("--folds", f.folds, "cross-validation folds")->check(CLI::Range(2, 100));
    o.workers = app.add_option("--workers", f.workers, "worker threads (default: all cores)")->check(CLI::Range(1u, 1024u));
    o.map_k = app.add_option("--map-k", f.map_k, "cutoff for MAP@k")->check(CLI::Range(1, 63));
    o.alpha = app.add_option("--alpha", f.alpha, "significance level for the critical difference (0.05 or 0.10)");
    o.rounds = app.add_option("--rounds", f.rounds, "boosting rounds")->check(CLI::Range(0, 100000));
    o.depth = app.add_option("--depth", f.depth, "maximum tree depth")->check(CLI::Range(0, 64));
    o.eta = app.add_option("--eta", f.eta, "learning rate");
    return o;
}

RunConfig resolve(const Flags& f, const Options& o)
{
    RunConfig c;
    if (!f.config_file.empty())
        c = config_from_json(read_file(f.config_file), c);
    if (o.manifest->count()) c.manifest = f.manifest;
    if (o.out->count()) c.out = f.out;
    if (o.seed->count()) c.seed = f.seed;
    if (o.folds->count()) c.folds = f.folds;
    if (o.workers->count()) c.workers = f.workers;
    if (o.map_k->count()) c.map_k = c.relevant_top = f.map_k;
    if (o.alpha->count()) c.alpha = f.alpha;
    if (o.rounds->count()) c.rounds = f.rounds;
    if (o.depth->count()) c.depth = f.depth;
    if (o.eta->count()) c.eta = f.eta;
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"autobagging: rank bagging workflows for classification datasets"};
    app.require_subcommand(1);

    Flags ingest_f, build_f, train_f, rank_f, bench_f;
    auto* ingest = app.add_subcommand("ingest", "validate the datasets listed in a manifest");
    const auto ingest_o = add_common(*ingest, ingest_f);
    auto* build = app.add_subcommand("build", "evaluate the workflow grid and compute metafeatures (resumable)");
    const auto build_o = add_common(*build, build_f);
    auto* train = app.add_subcommand("train", "train the ranking metamodel on the metadatabase");
    const auto train_o = add_common(*train, train_f);
    auto* rank = app.add_subcommand("rank", "rank the workflows for a new dataset");
    const auto rank_o = add_common(*rank, rank_f);
    std::string model, dataset, target = "class", dataset_id, output;
    rank->add_option("--model", model, "model.json (default: OUT/model.json)");
    rank->add_option("--dataset", dataset, "dataset CSV")->required()->check(CLI::ExistingFile);
    rank->add_option("--target", target, "target column");
    rank->add_option("--id", dataset_id, "dataset id (default: file stem)");
    rank->add_option("--output", output, "ranking CSV (default: OUT/ranking.csv)");
    auto* bench = app.add_subcommand("benchmark", "leave-one-dataset-out benchmark and result export");
    const auto bench_o = add_common(*bench, bench_f);
    std::string desk_dir, public_dir = "data/public";
    std::uint64_t desk_seed = 0;
    auto* desk = app.add_subcommand("desk-suite", "write the synthetic desk-suite CSVs and a manifest");
    desk->add_option("--out", desk_dir, "directory for the CSVs and manifest.json")->required();
    desk->add_option("--public", public_dir, "directory of public CSVs to include");
    desk->add_option("--seed", desk_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*ingest)
            return cmd_ingest(resolve(ingest_f, ingest_o), std::cout);
        if (*build)
            return cmd_build(resolve(build_f, build_o), std::cout);
        if (*train)
            return cmd_train(resolve(train_f, train_o), std::cout);
        if (*rank)
            return cmd_rank(resolve(rank_f, rank_o), model, dataset, target, dataset_id, output, std::cout);
        if (*bench)
            return cmd_benchmark(resolve(bench_f, bench_o), std::cout);
        if (*desk) {
            std::cout << write_desk_suite(desk_dir, public_dir, desk_seed) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
