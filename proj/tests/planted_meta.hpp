#pragma once

// Synthetic metadatabase with a planted dataset-dependent optimum: the dataset
// feature u (stored as class.entropy) switches the best workflows between two
// regions of the grid, so a ranker that reads u beats any fixed order. Other
// dataset features are constant unless `distractors` is set.

#include "autobagging/metadatabase.hpp"

#include <cstdio>

namespace autobagging::testing {

struct PlantedMeta {
    std::vector<PerformanceRecord> records;
    std::vector<MetafeatureVector> vectors;
};

inline PlantedMeta planted_metadatabase(std::uint64_t seed, std::size_t n_datasets, const Registry& registry,
                                        double noise = 0.002, bool distractors = false)
{
    Rng rng(seed);
    PlantedMeta out;
    const auto grid = enumerate_workflows();
    std::vector<DatasetProfile> profiles;
    for (std::size_t d = 0; d < n_datasets; ++d) {
        char id[32];
        std::snprintf(id, sizeof id, "planted%02zu", d);
        const double u = rng.uniform();
        DatasetProfile p{id, std::vector<double>(registry.size(), kMissing)};
        for (std::size_t i = 0; i < registry.size(); ++i)
            if (registry.specs()[i].block != MetaBlock::workflow && registry.specs()[i].function != "rank")
                p.values[i] = distractors ? rng.normal() : 0.0;
        p.values[registry.index_of("class.entropy")] = u;
        for (const auto& c : grid) {
            const double size = double(c.n_models) / 200.0;
            const double a = c.pruning == Pruning::mdsq
                                 ? c.cut_point() + 0.1 * size + (c.integration == Integration::vote ? 0.1 : 0.0)
                                 : 0.0;
            const double b = c.integration == Integration::knora_e
                                 ? size + (c.pruning == Pruning::bb ? 0.1 * c.cut_point() : 0.0)
                                 : 0.0;
            const double k = 0.5 + 0.3 * (u > 0.5 ? a : b) + noise * rng.normal();
            out.records.push_back({p.dataset_id, workflow_id(c), std::vector<double>(4, k), k, false, {}});
        }
        profiles.push_back(std::move(p));
    }
    sort_records(out.records);
    const auto ranks = rank_table(compute_metatargets(out.records));
    for (const auto& p : profiles)
        for (const auto& c : grid)
            out.vectors.push_back(compute_vector(p, c, ranks, registry));
    return out;
}

} // namespace autobagging::testing
