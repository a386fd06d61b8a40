#include "autobagging/metadatabase.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

namespace autobagging {

namespace {

using Key = std::pair<std::string, std::string>;

std::vector<std::vector<std::string>> read_rows(const std::string& text, std::vector<std::string>& header)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw Error("csv: empty input");
    header = split_csv_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw Error("csv: wrong field count in row " + std::to_string(rows.size() + 1));
        rows.push_back(std::move(f));
    }
    return rows;
}

double cell_double(const std::string& s)
{
    if (s.empty())
        return kMissing;
    double v = 0;
    if (!parse_double(s, v))
        throw Error("csv: bad number '" + s + "'");
    return v;
}

} // namespace

FoldAssignment dataset_folds(const Dataset& d, const BuildOptions& o)
{
    return stratified_folds(d, o.folds, derive_seed(o.seed, "folds/" + d.id));
}

std::uint64_t dataset_cv_seed(const std::string& dataset_id, std::uint64_t seed)
{
    return derive_seed(seed, "cv/" + dataset_id);
}

void sort_records(std::vector<PerformanceRecord>& records)
{
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.dataset_id, a.workflow_id) < std::tie(b.dataset_id, b.workflow_id);
    });
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].dataset_id == records[i - 1].dataset_id && records[i].workflow_id == records[i - 1].workflow_id)
            throw Error("duplicate performance record " + records[i].dataset_id + "/" + records[i].workflow_id);
}

std::vector<PerformanceRecord> build_performance_table(
    const std::vector<Dataset>& datasets, std::span<const WorkflowConfig> workflows, const BuildOptions& o,
    const std::vector<PerformanceRecord>& existing,
    const std::function<void(const std::vector<PerformanceRecord>&)>& on_dataset)
{
    std::set<Key> done;
    for (const auto& r : existing)
        done.insert({r.dataset_id, r.workflow_id});

    struct Job {
        const Dataset* d = nullptr;
        std::vector<WorkflowConfig> configs;
        FoldAssignment folds;
        std::vector<std::vector<double>> kappas;  // [fold][config]
        std::atomic<int> remaining{0};
        std::string error;
        std::mutex error_mutex;
    };
    std::vector<std::unique_ptr<Job>> jobs;
    std::set<std::string> ids;
    for (const auto& d : datasets) {
        if (!ids.insert(d.id).second)
            throw Error("duplicate dataset id " + d.id);
        auto job = std::make_unique<Job>();
        job->d = &d;
        for (const auto& c : workflows)
            if (!done.count({d.id, workflow_id(c)}))
                job->configs.push_back(c);
        if (job->configs.empty())
            continue;
        try {
            job->folds = dataset_folds(d, o);
        } catch (const std::exception& e) {
            job->error = e.what();
        }
        job->kappas.assign(std::size_t(o.folds), std::vector<double>(job->configs.size(), kMissing));
        job->remaining = o.folds;
        jobs.push_back(std::move(job));
    }

    std::vector<PerformanceRecord> fresh;
    std::mutex out_mutex;
    auto finish = [&](Job& job) {
        std::vector<PerformanceRecord> recs;
        for (std::size_t i = 0; i < job.configs.size(); ++i) {
            PerformanceRecord r{job.d->id, workflow_id(job.configs[i]), {}, kMissing, false, {}};
            if (!job.error.empty()) {
                r.fold_kappas.assign(std::size_t(o.folds), kMissing);
                r.flagged = true;
                r.note = "failed: " + job.error;
            } else {
                std::vector<double> k;
                for (int f = 0; f < o.folds; ++f)
                    k.push_back(job.kappas[std::size_t(f)][i]);
                const auto cv = cv_result(k);
                r.fold_kappas = cv.fold_kappas;
                r.mean_kappa = cv.mean_kappa;
                r.flagged = cv.flagged;
            }
            recs.push_back(std::move(r));
        }
        std::lock_guard lock(out_mutex);
        if (on_dataset)
            on_dataset(recs);
        fresh.insert(fresh.end(), recs.begin(), recs.end());
    };

    const std::size_t cells = jobs.size() * std::size_t(std::max(o.folds, 0));
    parallel_for(cells, o.workers, [&](std::size_t cell) {
        Job& job = *jobs[cell / std::size_t(o.folds)];
        const int f = int(cell % std::size_t(o.folds));
        if (job.error.empty()) {
            try {
                job.kappas[std::size_t(f)] = evaluate_grid_fold(job.configs, *job.d, job.folds, f,
                                                                dataset_cv_seed(job.d->id, o.seed), o.params);
            } catch (const std::exception& e) {
                std::lock_guard lock(job.error_mutex);
                if (job.error.empty())
                    job.error = e.what();
            }
        }
        if (--job.remaining == 0)
            finish(job);
    });

    std::vector<PerformanceRecord> all = existing;
    all.insert(all.end(), fresh.begin(), fresh.end());
    sort_records(all);
    return all;
}

std::vector<double> compute_ranks(std::span<const PerformanceRecord> records)
{
    std::vector<double> kappas;
    for (const auto& r : records)
        kappas.push_back(is_missing(r.mean_kappa) ? -std::numeric_limits<double>::infinity() : r.mean_kappa);
    return tie_averaged_ranks(kappas, true);
}

std::vector<int> ranks_to_relevance(std::span<const double> ranks, std::size_t n_items)
{
    std::vector<int> z;
    for (double r : ranks)
        z.push_back(std::max(1, int(n_items) + 1 - int(std::ceil(r))));
    return z;
}

std::vector<Metatarget> compute_metatargets(const std::vector<PerformanceRecord>& records)
{
    std::vector<Metatarget> out;
    for (std::size_t i = 0; i < records.size();) {
        std::size_t j = i;
        while (j < records.size() && records[j].dataset_id == records[i].dataset_id)
            ++j;
        const std::span<const PerformanceRecord> group(records.data() + i, j - i);
        const auto ranks = compute_ranks(group);
        const auto z = ranks_to_relevance(ranks, group.size());
        for (std::size_t t = 0; t < group.size(); ++t)
            out.push_back({group[t].dataset_id, group[t].workflow_id, ranks[t], z[t]});
        i = j;
    }
    return out;
}

RankTable rank_table(const std::vector<Metatarget>& targets, const std::vector<std::string>& datasets)
{
    const std::set<std::string> keep(datasets.begin(), datasets.end());
    RankTable t;
    for (const auto& m : targets)
        if (keep.empty() || keep.count(m.dataset_id))
            t[m.workflow_id].push_back(m.rank);
    return t;
}

MetaDataset assemble(const std::vector<Metatarget>& targets, const std::vector<MetafeatureVector>& vectors)
{
    std::map<Key, const MetafeatureVector*> by_key;
    for (const auto& v : vectors)
        if (!by_key.emplace(Key{v.dataset_id, v.workflow_id}, &v).second)
            throw Error("assemble: duplicate metafeature vector " + v.dataset_id + "/" + v.workflow_id);
    std::map<std::string, MetaGroup> groups;
    std::size_t used = 0;
    for (const auto& t : targets) {
        auto it = by_key.find({t.dataset_id, t.workflow_id});
        if (it == by_key.end())
            throw Error("assemble: no metafeature vector for " + t.dataset_id + "/" + t.workflow_id);
        auto& g = groups[t.dataset_id];
        g.dataset_id = t.dataset_id;
        g.examples.push_back({*it->second, t.rank, t.relevance});
        ++used;
    }
    if (used != vectors.size())
        throw Error("assemble: metafeature vectors without a metatarget");
    MetaDataset m;
    for (auto& [_, g] : groups) {
        std::sort(g.examples.begin(), g.examples.end(),
                  [](const auto& a, const auto& b) { return a.x.workflow_id < b.x.workflow_id; });
        m.groups.push_back(std::move(g));
    }
    return m;
}

std::string performance_to_csv(const std::vector<PerformanceRecord>& records, int folds)
{
    std::ostringstream out;
    out << "dataset_id,workflow_id";
    for (int f = 1; f <= folds; ++f)
        out << ",kappa_fold" << f;
    out << ",mean_kappa,flagged,note\n";
    for (const auto& r : records) {
        if (int(r.fold_kappas.size()) != folds)
            throw Error("performance_to_csv: fold count mismatch for " + r.dataset_id);
        out << csv_escape(r.dataset_id) << ',' << r.workflow_id;
        for (double k : r.fold_kappas)
            out << ',' << format_double(k);
        out << ',' << format_double(r.mean_kappa) << ',' << (r.flagged ? 1 : 0) << ',' << csv_escape(r.note) << '\n';
    }
    return out.str();
}

std::vector<PerformanceRecord> performance_from_csv(const std::string& text)
{
    std::vector<std::string> h;
    const auto rows = read_rows(text, h);
    if (h.size() < 5 || h[0] != "dataset_id" || h[1] != "workflow_id" || h[h.size() - 3] != "mean_kappa" ||
        h[h.size() - 2] != "flagged" || h.back() != "note")
        throw Error("performance csv: unexpected header");
    const std::size_t folds = h.size() - 5;
    std::vector<PerformanceRecord> out;
    for (const auto& f : rows) {
        PerformanceRecord r{f[0], f[1], {}, cell_double(f[2 + folds]), f[3 + folds] == "1", f[4 + folds]};
        parse_workflow_id(r.workflow_id);
        for (std::size_t k = 0; k < folds; ++k)
            r.fold_kappas.push_back(cell_double(f[2 + k]));
        out.push_back(std::move(r));
    }
    return out;
}

std::string metatargets_to_csv(const std::vector<Metatarget>& targets)
{
    std::ostringstream out;
    out << "dataset_id,workflow_id,rank,relevance\n";
    for (const auto& t : targets)
        out << csv_escape(t.dataset_id) << ',' << t.workflow_id << ',' << format_double(t.rank) << ',' << t.relevance
            << '\n';
    return out.str();
}

std::vector<Metatarget> metatargets_from_csv(const std::string& text)
{
    std::vector<std::string> h;
    const auto rows = read_rows(text, h);
    if (h != std::vector<std::string>{"dataset_id", "workflow_id", "rank", "relevance"})
        throw Error("metatarget csv: unexpected header");
    std::vector<Metatarget> out;
    for (const auto& f : rows) {
        const double z = cell_double(f[3]);
        out.push_back({f[0], f[1], cell_double(f[2]), int(z)});
    }
    return out;
}

} // namespace autobagging
