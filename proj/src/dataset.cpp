#include "autobagging/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

namespace autobagging {

bool is_missing_token(std::string_view token)
{
    token = trim(token);
    return token.empty() || token == "?" || token == "NA";
}

std::size_t Column::missing_count() const
{
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1));
}

Column Column::numeric(std::string name, std::vector<double> values)
{
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::numeric;
    c.missing.resize(values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (autobagging::is_missing(values[i])) {
            c.missing[i] = 1;
            values[i] = 0.0;
        } else if (!std::isfinite(values[i])) {
            throw Error("column " + c.name + ": non-finite value");
        }
    }
    c.values = std::move(values);
    return c;
}

Column Column::categorical(std::string name, const std::vector<std::string>& tokens)
{
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::categorical;
    std::set<std::string> vocab;
    for (const auto& t : tokens)
        if (!is_missing_token(t))
            vocab.emplace(trim(t));
    c.vocabulary.assign(vocab.begin(), vocab.end());
    c.values.resize(tokens.size(), 0.0);
    c.missing.resize(tokens.size(), 0);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (is_missing_token(tokens[i])) {
            c.missing[i] = 1;
            continue;
        }
        const auto it = std::lower_bound(c.vocabulary.begin(), c.vocabulary.end(),
                                         std::string(trim(tokens[i])));
        c.values[i] = static_cast<double>(it - c.vocabulary.begin());
    }
    return c;
}

std::vector<std::size_t> Dataset::class_counts() const
{
    std::vector<std::size_t> counts(n_classes(), 0);
    for (int y : target)
        ++counts[static_cast<std::size_t>(y)];
    return counts;
}

std::vector<std::size_t> Dataset::class_counts(std::span<const std::size_t> rows) const
{
    std::vector<std::size_t> counts(n_classes(), 0);
    for (auto r : rows)
        ++counts[static_cast<std::size_t>(target[r])];
    return counts;
}

std::vector<std::size_t> Dataset::all_rows() const
{
    std::vector<std::size_t> rows(n());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

std::uint64_t Dataset::row_hash(std::size_t row) const
{
    std::uint64_t h = mix64(static_cast<std::uint64_t>(target[row]) + 1);
    for (const auto& c : features) {
        const std::uint64_t v = c.is_missing(row) ? 0x7ff8dead0000beefULL
                                                  : std::bit_cast<std::uint64_t>(c.values[row] + 0.0);
        h = mix64(h ^ v);
    }
    return h;
}

std::uint64_t Dataset::content_hash() const
{
    std::uint64_t h = fnv1a(id);
    for (const auto& c : features)
        h = fnv1a(c.name, h);
    for (const auto& l : class_labels)
        h = fnv1a(l, h);
    for (std::size_t i = 0; i < n(); ++i)
        h = mix64(h ^ row_hash(i));
    return h;
}

void Dataset::validate() const
{
    const std::size_t rows = n();
    for (const auto& c : features) {
        if (c.values.size() != rows || c.missing.size() != rows)
            throw Error("dataset " + id + ": column " + c.name + " has wrong length");
        if (c.kind == ColumnKind::categorical) {
            for (std::size_t i = 0; i < rows; ++i)
                if (!c.is_missing(i) && (c.values[i] < 0 || c.values[i] >= double(c.category_count())))
                    throw Error("dataset " + id + ": column " + c.name + " has an out-of-vocabulary code");
        } else {
            for (std::size_t i = 0; i < rows; ++i)
                if (!c.is_missing(i) && !std::isfinite(c.values[i]))
                    throw Error("dataset " + id + ": column " + c.name + " has a non-finite value");
        }
    }
    for (int y : target)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes())
            throw Error("dataset " + id + ": target code out of range");
    const auto counts = class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
        throw Error("dataset " + id + ": target has fewer than 2 classes");
}

Dataset Dataset::from_labels(std::string id, std::vector<Column> features,
                             const std::vector<std::string>& labels)
{
    Dataset d;
    d.id = std::move(id);
    d.features = std::move(features);
    std::set<std::string> distinct(labels.begin(), labels.end());
    d.class_labels.assign(distinct.begin(), distinct.end());
    d.target.reserve(labels.size());
    for (const auto& l : labels)
        d.target.push_back(static_cast<int>(
            std::lower_bound(d.class_labels.begin(), d.class_labels.end(), l) - d.class_labels.begin()));
    d.validate();
    return d;
}

Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows)
{
    Dataset out;
    out.id = d.id;
    out.target_name = d.target_name;
    out.class_labels = d.class_labels;
    out.features.reserve(d.features.size());
    for (const auto& c : d.features) {
        Column s;
        s.name = c.name;
        s.kind = c.kind;
        s.vocabulary = c.vocabulary;
        s.values.reserve(rows.size());
        s.missing.reserve(rows.size());
        for (auto r : rows) {
            s.values.push_back(c.values[r]);
            s.missing.push_back(c.missing[r]);
        }
        out.features.push_back(std::move(s));
    }
    for (auto r : rows)
        out.target.push_back(d.target[r]);
    return out;
}

Dataset parse_csv(const std::string& text, const std::string& target_name,
                  const SchemaHints& hints, std::string id)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw Error("csv " + id + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header)
        h = std::string(trim(h));
    const auto target_it = std::find(header.begin(), header.end(), target_name);
    if (target_it == header.end())
        throw Error("csv " + id + ": target column '" + target_name + "' not found");
    const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());

    std::vector<std::vector<std::string>> cells(header.size());
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw Error("csv " + id + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
        if (is_missing_token(fields[target_col])) {
            ++dropped;
            continue;
        }
        for (std::size_t j = 0; j < fields.size(); ++j)
            cells[j].push_back(std::move(fields[j]));
    }

    std::vector<Column> features;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == target_col)
            continue;
        ColumnKind kind = ColumnKind::numeric;
        if (auto h = hints.find(header[j]); h != hints.end()) {
            kind = h->second;
        } else {
            double tmp;
            for (const auto& t : cells[j])
                if (!is_missing_token(t) && !parse_double(t, tmp)) {
                    kind = ColumnKind::categorical;
                    break;
                }
        }
        if (kind == ColumnKind::categorical) {
            features.push_back(Column::categorical(header[j], cells[j]));
        } else {
            std::vector<double> v(cells[j].size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (is_missing_token(cells[j][i]))
                    v[i] = kMissing;
                else if (!parse_double(cells[j][i], v[i]))
                    throw Error("csv " + id + ": column " + header[j] + " value '" + cells[j][i] +
                                "' is not numeric");
            }
            features.push_back(Column::numeric(header[j], std::move(v)));
        }
    }

    std::vector<std::string> labels;
    labels.reserve(cells[target_col].size());
    for (const auto& t : cells[target_col])
        labels.emplace_back(trim(t));
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw Error("csv " + id + ": target '" + target_name + "' has fewer than 2 classes");
    Dataset d = Dataset::from_labels(std::move(id), std::move(features), labels);
    d.target_name = target_name;
    d.dropped_rows = dropped;
    return d;
}

Dataset load_csv(const std::string& path, const std::string& target_name,
                 const SchemaHints& hints, std::string id)
{
    if (id.empty())
        id = std::filesystem::path(path).stem().string();
    return parse_csv(read_file(path), target_name, hints, std::move(id));
}

std::string to_csv(const Dataset& d)
{
    std::string out;
    for (const auto& c : d.features)
        out += csv_escape(c.name) + ",";
    out += csv_escape(d.target_name) + "\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (const auto& c : d.features) {
            if (c.is_missing(i))
                out += "?";
            else if (c.is_numeric())
                out += format_double(c.values[i]);
            else
                out += csv_escape(c.vocabulary[static_cast<std::size_t>(c.values[i])]);
            out += ",";
        }
        out += csv_escape(d.class_labels[static_cast<std::size_t>(d.target[i])]) + "\n";
    }
    return out;
}

Eligibility check_eligibility(const Dataset& d, const EligibilityLimits& limits)
{
    if (d.n() < limits.min_rows)
        return Eligibility::too_small;
    if (d.n() > limits.max_rows)
        return Eligibility::too_large;
    if (d.n_features() > limits.max_features)
        return Eligibility::too_wide;
    return Eligibility::eligible;
}

std::string to_string(Eligibility e)
{
    switch (e) {
    case Eligibility::eligible: return "eligible";
    case Eligibility::too_small: return "too_small";
    case Eligibility::too_large: return "too_large";
    case Eligibility::too_wide: return "too_wide";
    }
    return "unknown";
}

std::vector<std::size_t> FoldAssignment::test_rows(int fold) const
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold)
            rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldAssignment::train_rows(int fold) const
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold)
            rows.push_back(i);
    return rows;
}

FoldAssignment stratified_folds(const Dataset& d, int k, std::uint64_t seed)
{
    if (k < 2)
        throw Error("stratified_folds: k must be at least 2");
    if (static_cast<std::size_t>(k) > d.n())
        throw Error("stratified_folds: k exceeds the instance count of " + d.id);

    std::vector<std::uint64_t> hashes(d.n());
    for (std::size_t i = 0; i < d.n(); ++i)
        hashes[i] = d.row_hash(i);

    FoldAssignment fa;
    fa.dataset_id = d.id;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of.assign(d.n(), -1);

    Rng rng(seed);
    std::size_t next_fold = 0;
    for (std::size_t c = 0; c < d.n_classes(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.n(); ++i)
            if (static_cast<std::size_t>(d.target[i]) == c)
                members.push_back(i);
        // Canonical order first; identical rows are interchangeable so the
        // index tie-break does not affect any content-level result.
        std::sort(members.begin(), members.end(), [&](auto a, auto b) {
            return hashes[a] != hashes[b] ? hashes[a] < hashes[b] : a < b;
        });
        rng.shuffle(members);
        for (auto i : members) {
            fa.fold_of[i] = static_cast<int>(next_fold);
            next_fold = (next_fold + 1) % static_cast<std::size_t>(k);
        }
    }
    return fa;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx)
        i = rng.below(n);
    return idx;
}

Encoder::Encoder(const Dataset& d, std::span<const std::size_t> fit_rows)
{
    mean_.assign(d.n_features(), 0.0);
    sd_.assign(d.n_features(), 0.0);
    for (std::size_t j = 0; j < d.n_features(); ++j) {
        const Column& c = d.features[j];
        if (c.is_numeric()) {
            // Summed in sorted order so the statistics do not depend on row order.
            std::vector<double> x;
            x.reserve(fit_rows.size());
            for (auto r : fit_rows)
                if (!c.is_missing(r))
                    x.push_back(c.values[r]);
            std::sort(x.begin(), x.end());
            if (!x.empty()) {
                double sum = 0.0;
                for (double v : x)
                    sum += v;
                const double mean = sum / static_cast<double>(x.size());
                double ss = 0.0;
                for (double v : x)
                    ss += (v - mean) * (v - mean);
                mean_[j] = mean;
                sd_[j] = std::sqrt(ss / static_cast<double>(x.size()));
            }
            provenance_.push_back({j, -1});
        } else {
            for (std::size_t k = 0; k < c.category_count(); ++k)
                provenance_.push_back({j, static_cast<int>(k)});
        }
    }
}

Encoder Encoder::restore(std::vector<EncodedColumn> provenance, std::vector<double> means,
                         std::vector<double> scales)
{
    Encoder e;
    e.provenance_ = std::move(provenance);
    e.mean_ = std::move(means);
    e.sd_ = std::move(scales);
    return e;
}

Eigen::MatrixXd Encoder::transform(const Dataset& d, std::span<const std::size_t> rows) const
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(width()));
    for (std::size_t out = 0; out < provenance_.size(); ++out) {
        const auto [src, category] = provenance_[out];
        const Column& c = d.features[src];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = rows[i];
            if (c.is_missing(r))
                continue;
            double v;
            if (category < 0)
                v = sd_[src] > 0.0 ? (c.values[r] - mean_[src]) / sd_[src] : 0.0;
            else
                v = static_cast<int>(c.values[r]) == category ? 1.0 : 0.0;
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out)) = v;
        }
    }
    return m;
}

Eigen::MatrixXd Encoder::transform(const Dataset& d) const
{
    const auto rows = d.all_rows();
    return transform(d, rows);
}

EncodedView encode(const Dataset& d, std::span<const std::size_t> fit_rows)
{
    if (fit_rows.empty())
        throw Error("encode: fit_rows is empty");
    Encoder enc(d, fit_rows);
    return {enc.transform(d), enc.provenance()};
}

} // namespace autobagging
