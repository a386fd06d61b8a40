#include "autobagging/pipeline.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace autobagging {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string in_out(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

std::string require_file(const RunConfig& c, const std::string& name, const std::string& producer)
{
    const auto p = in_out(c, name);
    if (!fs::exists(p))
        throw Error(name + " not found in " + c.out + "; run `autobagging " + producer + "` first");
    return p;
}

void write_provenance(const RunConfig& c, const std::string& command, const Registry& registry)
{
    ordered_json p;
    p["command"] = command;
    p["code_version"] = kCodeVersion;
    p["registry_hash"] = registry.manifest_hash();
    p["config"] = json::parse(config_to_json(c));
    write_file_atomic(in_out(c, "provenance_" + command + ".json"), p.dump(2) + "\n");
}

std::string store_hash(const std::vector<StoreEntry>& entries)
{
    std::ostringstream s;
    for (const auto& e : entries)
        s << e.id << '|' << e.target << '|' << e.status << '|' << e.content_hash << '\n';
    return hex64(fnv1a(s.str()));
}

// Reads performance.csv line by line; rows that do not parse or do not belong
// to this build are returned separately.
std::vector<PerformanceRecord> read_performance_tolerant(const std::string& text, int folds,
                                                         const std::set<std::string>& datasets,
                                                         const std::set<std::string>& workflows,
                                                         std::vector<std::string>& quarantined)
{
    std::istringstream in(text);
    std::string header;
    std::vector<PerformanceRecord> out;
    if (!std::getline(in, header))
        return out;
    const auto expected = performance_to_csv({}, folds);
    if (header + "\n" != expected) {
        quarantined.push_back(header);
        std::string line;
        while (std::getline(in, line))
            quarantined.push_back(line);
        return out;
    }
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        try {
            auto recs = performance_from_csv(header + "\n" + line + "\n");
            auto& r = recs.at(0);
            if (!datasets.count(r.dataset_id) || !workflows.count(r.workflow_id) ||
                !seen.insert({r.dataset_id, r.workflow_id}).second)
                throw Error("foreign or duplicate row");
            out.push_back(std::move(r));
        } catch (const std::exception&) {
            quarantined.push_back(line);
        }
    }
    return out;
}

struct Metadatabase {
    std::vector<PerformanceRecord> records;
    std::vector<MetafeatureVector> vectors;
    std::vector<Metatarget> targets;
};

Metadatabase read_metadatabase(const RunConfig& c, const Registry& registry)
{
    Metadatabase m;
    const auto meta = json::parse(read_file(require_file(c, "metadatabase.json", "build")));
    if (meta.at("registry_hash").get<std::string>() != registry.manifest_hash())
        throw Error("metadatabase in " + c.out + " was built with a different metafeature registry; rebuild it");
    m.records = performance_from_csv(read_file(require_file(c, "performance.csv", "build")));
    m.targets = metatargets_from_csv(read_file(require_file(c, "metatarget.csv", "build")));
    m.vectors = metafeatures_from_csv(read_file(require_file(c, "metafeatures.csv", "build")), registry);
    return m;
}

} // namespace

std::uint64_t RunConfig::require_seed() const
{
    if (!seed)
        throw Error("a seed is required (--seed or \"seed\" in the config file)");
    return *seed;
}

unsigned RunConfig::effective_workers() const { return workers ? workers : default_workers(); }

RankerConfig RunConfig::ranker() const
{
    RankerConfig r;
    r.rounds = rounds;
    r.max_depth = depth;
    r.eta = eta;
    r.lambda = lambda;
    r.min_child_weight = min_child_weight;
    r.subsample = subsample;
    r.seed = derive_seed(require_seed(), "ranker");
    return r;
}

EvalConfig RunConfig::eval() const
{
    EvalConfig e;
    e.ranker = ranker();
    e.map_k = map_k;
    e.relevant_top = relevant_top;
    e.alpha = alpha;
    e.workers = effective_workers();
    return e;
}

std::vector<WorkflowConfig> RunConfig::grid() const
{
    if (workflows.empty())
        return enumerate_workflows();
    std::vector<WorkflowConfig> g;
    std::set<std::string> seen;
    for (const auto& id : workflows) {
        if (!seen.insert(id).second)
            throw Error("duplicate workflow in config: " + id);
        g.push_back(parse_workflow_id(id));
    }
    return g;
}

RunConfig config_from_json(const std::string& text, RunConfig c)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    if (!j.is_object())
        throw Error("config: expected a JSON object");
    static const std::set<std::string> known{"manifest", "out",    "seed",   "folds",  "workers",
                                             "map_k",    "alpha",  "rounds", "depth",  "eta",
                                             "lambda",   "min_child_weight", "subsample", "relevant_top",
                                             "workflows"};
    for (const auto& [k, _] : j.items())
        if (!known.count(k))
            throw Error("config: unknown key '" + k + "'");
    try {
        if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
        if (j.contains("out")) c.out = j["out"].get<std::string>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("folds")) c.folds = j["folds"].get<int>();
        if (j.contains("workers")) c.workers = j["workers"].get<unsigned>();
        if (j.contains("map_k")) c.map_k = j["map_k"].get<int>();
        if (j.contains("relevant_top")) c.relevant_top = j["relevant_top"].get<int>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("rounds")) c.rounds = j["rounds"].get<int>();
        if (j.contains("depth")) c.depth = j["depth"].get<int>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        if (j.contains("min_child_weight")) c.min_child_weight = j["min_child_weight"].get<double>();
        if (j.contains("subsample")) c.subsample = j["subsample"].get<double>();
        if (j.contains("workflows")) c.workflows = j["workflows"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return c;
}

std::string config_to_json(const RunConfig& c)
{
    ordered_json j;
    j["manifest"] = c.manifest;
    j["out"] = c.out;
    if (c.seed)
        j["seed"] = *c.seed;
    else
        j["seed"] = nullptr;
    j["folds"] = c.folds;
    j["workers"] = c.effective_workers();
    j["map_k"] = c.map_k;
    j["relevant_top"] = c.relevant_top;
    j["alpha"] = c.alpha;
    j["rounds"] = c.rounds;
    j["depth"] = c.depth;
    j["eta"] = c.eta;
    j["lambda"] = c.lambda;
    j["min_child_weight"] = c.min_child_weight;
    j["subsample"] = c.subsample;
    j["workflows"] = c.workflows;
    return j.dump(2) + "\n";
}

std::vector<const StoreEntry*> Store::eligible() const
{
    std::vector<const StoreEntry*> out;
    for (const auto& e : entries)
        if (e.status == "eligible")
            out.push_back(&e);
    return out;
}

std::vector<StoreEntry> read_manifest(const std::string& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error("manifest " + path + ": " + e.what());
    }
    const json& list = j.is_array() ? j : j.value("datasets", json::array());
    if (!list.is_array() || list.empty())
        throw Error("manifest " + path + ": no datasets listed");
    const fs::path base = fs::absolute(fs::path(path)).parent_path();
    std::vector<StoreEntry> out;
    std::set<std::string> ids;
    for (const auto& d : list) {
        StoreEntry e;
        try {
            e.id = d.at("id").get<std::string>();
            fs::path p = d.at("path").get<std::string>();
            e.path = (p.is_absolute() ? p : base / p).lexically_normal().string();
            e.target = d.value("target", std::string("class"));
            e.categorical = d.value("categorical", std::vector<std::string>{});
        } catch (const json::exception& ex) {
            throw Error("manifest " + path + ": " + ex.what());
        }
        if (!ids.insert(e.id).second)
            throw Error("manifest " + path + ": duplicate dataset id " + e.id);
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

Dataset load_entry(const StoreEntry& e)
{
    SchemaHints hints;
    for (const auto& name : e.categorical)
        hints[name] = ColumnKind::categorical;
    return load_csv(e.path, e.target, hints, e.id);
}

Store read_store(const std::string& out_dir)
{
    const auto p = (fs::path(out_dir) / "store.json").string();
    if (!fs::exists(p))
        throw Error("store.json not found in " + out_dir + "; run `autobagging ingest` first");
    const auto j = json::parse(read_file(p));
    Store s;
    s.hash = j.at("store_hash").get<std::string>();
    for (const auto& d : j.at("datasets")) {
        StoreEntry e;
        e.id = d.at("id");
        e.path = d.at("path");
        e.target = d.at("target");
        e.categorical = d.value("categorical", std::vector<std::string>{});
        e.status = d.at("status");
        e.reason = d.value("reason", std::string());
        e.rows = d.value("rows", std::size_t{0});
        e.features = d.value("features", std::size_t{0});
        e.classes = d.value("classes", std::size_t{0});
        e.dropped_rows = d.value("dropped_rows", std::size_t{0});
        e.content_hash = d.value("content_hash", std::string());
        s.entries.push_back(std::move(e));
    }
    return s;
}

int cmd_ingest(const RunConfig& c, std::ostream& log)
{
    c.require_seed();
    if (c.manifest.empty())
        throw Error("ingest needs --manifest");
    auto entries = read_manifest(c.manifest);
    for (auto& e : entries) {
        try {
            const auto d = load_entry(e);
            e.rows = d.n();
            e.features = d.n_features();
            e.classes = d.n_classes();
            e.dropped_rows = d.dropped_rows;
            e.content_hash = hex64(d.content_hash());
            const auto el = check_eligibility(d);
            e.status = to_string(el);
            if (el != Eligibility::eligible)
                e.reason = e.status + ": " + std::to_string(d.n()) + " rows, " + std::to_string(d.n_features()) +
                           " features";
        } catch (const std::exception& ex) {
            e.status = "error";
            e.reason = ex.what();
        }
    }
    Store s{entries, store_hash(entries)};
    ordered_json j;
    j["code_version"] = kCodeVersion;
    j["store_hash"] = s.hash;
    j["datasets"] = ordered_json::array();
    for (const auto& e : entries) {
        ordered_json d;
        d["id"] = e.id;
        d["path"] = e.path;
        d["target"] = e.target;
        d["categorical"] = e.categorical;
        d["status"] = e.status;
        if (!e.reason.empty())
            d["reason"] = e.reason;
        d["rows"] = e.rows;
        d["features"] = e.features;
        d["classes"] = e.classes;
        d["dropped_rows"] = e.dropped_rows;
        d["content_hash"] = e.content_hash;
        j["datasets"].push_back(d);
    }
    fs::create_directories(c.out);
    write_file_atomic(in_out(c, "store.json"), j.dump(2) + "\n");
    write_provenance(c, "ingest", build_registry());
    std::size_t ok = 0;
    for (const auto& e : entries) {
        if (e.status == "eligible")
            ++ok;
        else
            log << "rejected " << e.id << ": " << e.reason << "\n";
    }
    log << "store " << s.hash << ": " << ok << " eligible of " << entries.size() << "\n";
    return ok > 0 ? 0 : 1;
}

int cmd_build(const RunConfig& c, std::ostream& log)
{
    const auto seed = c.require_seed();
    const auto store = read_store(c.out);
    const auto registry = build_registry();
    const auto grid = c.grid();

    std::vector<Dataset> data;
    for (const auto* e : store.eligible()) {
        data.push_back(load_entry(*e));
        if (hex64(data.back().content_hash()) != e->content_hash)
            throw Error("dataset " + e->id + " changed since ingest; rerun `autobagging ingest`");
    }
    if (data.empty())
        throw Error("the store has no eligible datasets");

    BuildOptions o;
    o.folds = c.folds;
    o.seed = seed;
    o.workers = c.effective_workers();

    std::set<std::string> ids, wids;
    for (const auto& d : data)
        ids.insert(d.id);
    for (const auto& w : grid)
        wids.insert(workflow_id(w));
    std::vector<PerformanceRecord> existing;
    const auto perf_path = in_out(c, "performance.csv");
    if (fs::exists(perf_path)) {
        std::vector<std::string> bad;
        existing = read_performance_tolerant(read_file(perf_path), c.folds, ids, wids, bad);
        if (!bad.empty()) {
            std::string q;
            for (const auto& l : bad)
                q += l + "\n";
            write_file_atomic(in_out(c, "performance.quarantine.csv"), q);
            log << "quarantined " << bad.size() << " rows of performance.csv\n";
        }
        log << "resuming with " << existing.size() << " existing records\n";
    }

    auto progress = existing;
    const auto records = build_performance_table(data, grid, o, existing, [&](const auto& recs) {
        progress.insert(progress.end(), recs.begin(), recs.end());
        auto snapshot = progress;
        sort_records(snapshot);
        write_file_atomic(perf_path, performance_to_csv(snapshot, c.folds));
        log << "evaluated " << recs.front().dataset_id << " (" << recs.size() << " workflows)\n";
    });
    write_file_atomic(perf_path, performance_to_csv(records, c.folds));
    std::size_t flagged = 0;
    for (const auto& r : records)
        flagged += r.flagged ? 1 : 0;

    const auto targets = compute_metatargets(records);
    const auto ranks = rank_table(targets);
    std::vector<DatasetProfile> profiles(data.size());
    parallel_for(data.size(), o.workers, [&](std::size_t i) {
        profiles[i] = profile_dataset(data[i], dataset_folds(data[i], o), registry);
    });
    std::vector<MetafeatureVector> vectors;
    for (const auto& p : profiles)
        for (const auto& w : grid)
            vectors.push_back(compute_vector(p, w, ranks, registry));
    write_file_atomic(in_out(c, "metatarget.csv"), metatargets_to_csv(targets));
    write_file_atomic(in_out(c, "metafeatures.csv"), metafeatures_to_csv(vectors, registry));
    write_file_atomic(in_out(c, "registry.json"), registry.manifest_json());

    ordered_json m;
    m["code_version"] = kCodeVersion;
    m["seed"] = seed;
    m["folds"] = c.folds;
    m["store_hash"] = store.hash;
    m["registry_hash"] = registry.manifest_hash();
    m["datasets"] = std::vector<std::string>(ids.begin(), ids.end());
    m["workflows"] = grid.size();
    m["performance_rows"] = records.size();
    m["flagged_rows"] = flagged;
    write_file_atomic(in_out(c, "metadatabase.json"), m.dump(2) + "\n");
    write_provenance(c, "build", registry);
    log << "metadatabase: " << records.size() << " performance rows, " << registry.size() << " metafeatures, "
        << flagged << " flagged\n";
    return 0;
}

int cmd_train(const RunConfig& c, std::ostream& log)
{
    c.require_seed();
    const auto registry = build_registry();
    const auto db = read_metadatabase(c, registry);
    const auto meta = assemble(db.targets, db.vectors);
    std::vector<double> trace;
    const auto model = train_ranker(meta, c.ranker(), registry.names(), registry.manifest_hash(), &trace);
    write_file_atomic(in_out(c, "model.json"), model.to_json());
    write_file_atomic(in_out(c, "importance.csv"), importance_to_csv(model));
    std::ostringstream loss;
    loss << "round,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        loss << i << ',' << format_double(trace[i]) << '\n';
    write_file_atomic(in_out(c, "train_loss.csv"), loss.str());
    write_provenance(c, "train", registry);
    log << "trained " << model.trees.size() << " trees on " << meta.size() << " datasets; loss "
        << format_double(trace.front()) << " -> " << format_double(trace.back()) << "\n";
    return 0;
}

std::string ranking_to_csv(const std::vector<RankedWorkflow>& ranked)
{
    std::ostringstream out;
    out << "position,workflow_id,score\n";
    for (std::size_t i = 0; i < ranked.size(); ++i)
        out << i + 1 << ',' << ranked[i].workflow_id << ',' << format_double(ranked[i].score) << '\n';
    return out.str();
}

int cmd_rank(const RunConfig& c, const std::string& model_path, const std::string& dataset_path,
             const std::string& target, const std::string& dataset_id, const std::string& output, std::ostream& log)
{
    const auto seed = c.require_seed();
    const auto registry = build_registry();
    const auto mpath = model_path.empty() ? require_file(c, "model.json", "train") : model_path;
    const auto model = GBRanker::from_json(read_file(mpath));
    const std::string id = dataset_id.empty() ? fs::path(dataset_path).stem().string() : dataset_id;
    const auto d = load_csv(dataset_path, target, {}, id);
    if (check_eligibility(d) != Eligibility::eligible)
        log << "warning: " << id << " is " << to_string(check_eligibility(d)) << "\n";

    // Rank features come from the training store, never from the dataset being ranked.
    std::vector<Metatarget> others;
    for (auto& t : metatargets_from_csv(read_file(require_file(c, "metatarget.csv", "build"))))
        if (t.dataset_id != id)
            others.push_back(std::move(t));
    const auto ranks = rank_table(others);

    BuildOptions o;
    o.folds = c.folds;
    o.seed = seed;
    const auto profile = profile_dataset(d, dataset_folds(d, o), registry);
    std::vector<MetafeatureVector> vectors;
    for (const auto& w : c.grid())
        vectors.push_back(compute_vector(profile, w, ranks, registry));
    const auto csv = ranking_to_csv(rank_workflows(model, vectors, registry.manifest_hash()));
    write_file_atomic(output.empty() ? in_out(c, "ranking.csv") : output, csv);
    log << csv;
    return 0;
}

int cmd_benchmark(const RunConfig& c, std::ostream& log)
{
    c.require_seed();
    const auto registry = build_registry();
    const auto db = read_metadatabase(c, registry);
    const auto rep = run_benchmark(db.records, db.vectors, registry, c.eval());
    export_results(rep, c.out);
    const auto problems = audit(rep);

    ordered_json s;
    s["datasets"] = rep.folds.size();
    s["map_at_k"] = {{"k", c.map_k}, {"autoBagging", rep.map_autobagging}, {"average_rank", rep.map_average_rank}};
    s["loss_at_1"] = {{"autoBagging", rep.loss_autobagging.at(0)}, {"average_rank", rep.loss_average_rank.at(0)}};
    ordered_json mean = ordered_json::object();
    for (std::size_t m = 0; m < rep.methods.size(); ++m) {
        double sum = 0;
        for (const auto& row : rep.base_kappa)
            sum += row[m];
        mean[rep.methods[m]] = sum / double(rep.base_kappa.size());
    }
    s["mean_kappa"] = mean;
    s["audit"] = problems;
    write_file_atomic(in_out(c, "benchmark_summary.json"), s.dump(2) + "\n");
    write_provenance(c, "benchmark", registry);

    log << "MAP@" << c.map_k << ": autoBagging " << format_double(rep.map_autobagging) << ", average rank "
        << format_double(rep.map_average_rank) << "\n";
    log << "loss@1: autoBagging " << format_double(rep.loss_autobagging[0]) << ", average rank "
        << format_double(rep.loss_average_rank[0]) << "\n";
    for (std::size_t m = 0; m < rep.methods.size(); ++m)
        log << "  " << rep.methods[m] << " mean kappa " << format_double(mean[rep.methods[m]].get<double>())
            << ", average rank " << format_double(rep.cd.average_ranks[m]) << "\n";
    log << "Friedman chi2 " << format_double(rep.cd.chi2) << " (p " << format_double(rep.cd.chi2_p) << "), CD "
        << format_double(rep.cd.cd) << "\n";
    for (const auto& p : problems)
        log << "AUDIT FAILURE: " << p << "\n";
    return problems.empty() ? 0 : 2;
}

} // namespace autobagging
