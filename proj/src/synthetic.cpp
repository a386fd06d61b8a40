#include "autobagging/synthetic.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

namespace autobagging {

namespace {

std::string label(int c) { return "c" + std::to_string(c); }

// Flip a fraction of labels to a random other class.
void add_label_noise(std::vector<int>& y, int classes, double rate, Rng& rng)
{
    for (auto& v : y)
        if (rng.uniform() < rate)
            v = (v + 1 + int(rng.below(std::size_t(classes - 1)))) % classes;
}

Dataset assemble_table(const SyntheticSpec& s, std::vector<Column> cols, const std::vector<int>& y)
{
    std::vector<std::string> labels;
    for (int v : y)
        labels.push_back(label(v));
    return Dataset::from_labels(s.id, std::move(cols), labels);
}

std::vector<double> noise_column(std::size_t n, Rng& rng)
{
    std::vector<double> v(n);
    for (auto& x : v)
        x = rng.normal();
    return v;
}

std::string num_name(std::size_t j) { return "x" + std::to_string(j + 1); }

Dataset blobs(const SyntheticSpec& s, Rng& rng)
{
    const int classes = 3;
    const std::size_t p = 5;
    std::vector<std::vector<double>> centers(classes, std::vector<double>(p));
    for (auto& c : centers)
        for (auto& v : c)
            v = rng.normal(0, 1.2);
    std::vector<std::vector<double>> cols(p, std::vector<double>(s.n));
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        y[i] = int(i % classes);
        for (std::size_t j = 0; j < p; ++j)
            cols[j][i] = centers[std::size_t(y[i])][j] + rng.normal();
    }
    std::vector<Column> out;
    for (std::size_t j = 0; j < p; ++j)
        out.push_back(Column::numeric(num_name(j), cols[j]));
    return assemble_table(s, std::move(out), y);
}

Dataset xor_table(const SyntheticSpec& s, Rng& rng)
{
    std::vector<double> a(s.n), b(s.n);
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        a[i] = rng.uniform() * 2 - 1;
        b[i] = rng.uniform() * 2 - 1;
        y[i] = (a[i] > 0) != (b[i] > 0) ? 1 : 0;
    }
    add_label_noise(y, 2, 0.08, rng);
    std::vector<Column> out{Column::numeric("a", a), Column::numeric("b", b)};
    for (std::size_t j = 0; j < 4; ++j)
        out.push_back(Column::numeric("noise" + std::to_string(j + 1), noise_column(s.n, rng)));
    return assemble_table(s, std::move(out), y);
}

Dataset rings(const SyntheticSpec& s, Rng& rng)
{
    std::vector<double> a(s.n), b(s.n);
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        y[i] = int(i % 3);
        const double r = 1.0 + y[i] + rng.normal(0, 0.35), t = rng.uniform() * 2 * std::numbers::pi;
        a[i] = r * std::cos(t);
        b[i] = r * std::sin(t);
    }
    std::vector<Column> out{Column::numeric("u", a), Column::numeric("v", b),
                            Column::numeric("noise", noise_column(s.n, rng))};
    return assemble_table(s, std::move(out), y);
}

Dataset mixed(const SyntheticSpec& s, Rng& rng)
{
    const std::vector<std::string> colors{"red", "green", "blue"}, sizes{"S", "M", "L", "XL"}, flags{"yes", "no"};
    std::vector<std::string> color(s.n), size(s.n), flag(s.n);
    std::vector<double> w(s.n), h(s.n), z(s.n);
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t ci = rng.below(3), si = rng.below(4), fi = rng.below(2);
        w[i] = rng.normal(double(si), 1.0);
        h[i] = rng.normal(0, 1);
        z[i] = rng.uniform() < 0.1 ? kMissing : rng.normal(0, 2);
        y[i] = int((ci + (w[i] + h[i] > 1.5 ? 1 : 0) + fi) % 4);
        color[i] = rng.uniform() < 0.05 ? "?" : colors[ci];
        size[i] = sizes[si];
        flag[i] = rng.uniform() < 0.05 ? "NA" : flags[fi];
    }
    add_label_noise(y, 4, 0.1, rng);
    std::vector<Column> out{Column::categorical("color", color), Column::categorical("size", size),
                            Column::categorical("flag", flag), Column::numeric("weight", w),
                            Column::numeric("height", h), Column::numeric("z", z)};
    return assemble_table(s, std::move(out), y);
}

Dataset imbalanced(const SyntheticSpec& s, Rng& rng)
{
    const std::size_t p = 8;
    std::vector<std::vector<double>> cols(p, std::vector<double>(s.n));
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        y[i] = rng.uniform() < 0.12 ? 1 : 0;
        for (std::size_t j = 0; j < p; ++j)
            cols[j][i] = rng.normal(y[i] && j < 3 ? 1.0 : 0.0, 1.0);
    }
    std::vector<Column> out;
    for (std::size_t j = 0; j < p; ++j)
        out.push_back(Column::numeric(num_name(j), cols[j]));
    return assemble_table(s, std::move(out), y);
}

Dataset linear(const SyntheticSpec& s, Rng& rng)
{
    const std::size_t p = 30;
    std::vector<double> beta(p);
    for (std::size_t j = 0; j < p; ++j)
        beta[j] = j < 6 ? rng.normal() : 0.0;
    std::vector<std::vector<double>> cols(p, std::vector<double>(s.n));
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        double score = 0;
        for (std::size_t j = 0; j < p; ++j) {
            cols[j][i] = rng.normal();
            score += beta[j] * cols[j][i];
        }
        y[i] = score + rng.normal(0, 0.5) > 0 ? 1 : 0;
    }
    std::vector<Column> out;
    for (std::size_t j = 0; j < p; ++j)
        out.push_back(Column::numeric(num_name(j), cols[j]));
    return assemble_table(s, std::move(out), y);
}

Dataset categorical_only(const SyntheticSpec& s, Rng& rng)
{
    const std::size_t p = 6;
    std::vector<std::vector<std::string>> cols(p, std::vector<std::string>(s.n));
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        int votes = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t v = rng.below(3);
            cols[j][i] = std::string(1, char('a' + v));
            if (j < 3 && v == 0)
                ++votes;
        }
        y[i] = votes >= 2 ? 2 : votes == 1 ? 1 : 0;
    }
    add_label_noise(y, 3, 0.1, rng);
    std::vector<Column> out;
    for (std::size_t j = 0; j < p; ++j)
        out.push_back(Column::categorical("k" + std::to_string(j + 1), cols[j]));
    return assemble_table(s, std::move(out), y);
}

Dataset sparse_missing(const SyntheticSpec& s, Rng& rng)
{
    const std::size_t p = 6;
    std::vector<std::vector<double>> cols(p, std::vector<double>(s.n));
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        y[i] = int(i % 3);
        for (std::size_t j = 0; j < p; ++j) {
            const double v = rng.normal(j < 2 ? 1.2 * y[i] : 0.0, 1.0);
            cols[j][i] = rng.uniform() < 0.2 ? kMissing : v;
        }
    }
    std::vector<Column> out;
    for (std::size_t j = 0; j < p; ++j)
        out.push_back(Column::numeric(num_name(j), cols[j]));
    return assemble_table(s, std::move(out), y);
}

Dataset spirals(const SyntheticSpec& s, Rng& rng)
{
    std::vector<double> a(s.n), b(s.n);
    std::vector<int> y(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
        y[i] = int(i % 2);
        const double t = 0.5 + rng.uniform() * 3 * std::numbers::pi;
        const double phase = y[i] ? std::numbers::pi : 0.0;
        a[i] = t * std::cos(t + phase) + rng.normal(0, 0.4);
        b[i] = t * std::sin(t + phase) + rng.normal(0, 0.4);
    }
    std::vector<Column> out{Column::numeric("a", a), Column::numeric("b", b)};
    for (std::size_t j = 0; j < 2; ++j)
        out.push_back(Column::numeric("noise" + std::to_string(j + 1), noise_column(s.n, rng)));
    return assemble_table(s, std::move(out), y);
}

} // namespace

Dataset make_synthetic(const SyntheticSpec& spec)
{
    Rng rng(derive_seed(spec.seed, spec.kind));
    if (spec.kind == "blobs")
        return blobs(spec, rng);
    if (spec.kind == "xor")
        return xor_table(spec, rng);
    if (spec.kind == "rings")
        return rings(spec, rng);
    if (spec.kind == "mixed")
        return mixed(spec, rng);
    if (spec.kind == "imbalanced")
        return imbalanced(spec, rng);
    if (spec.kind == "linear")
        return linear(spec, rng);
    if (spec.kind == "categorical")
        return categorical_only(spec, rng);
    if (spec.kind == "sparse_missing")
        return sparse_missing(spec, rng);
    if (spec.kind == "spirals")
        return spirals(spec, rng);
    throw Error("make_synthetic: unknown kind " + spec.kind);
}

std::vector<SyntheticSpec> desk_synthetic_specs(std::uint64_t seed)
{
    return {{"syn_blobs", "blobs", 450, seed},           {"syn_xor", "xor", 600, seed},
            {"syn_rings", "rings", 500, seed},           {"syn_mixed", "mixed", 800, seed},
            {"syn_imbalanced", "imbalanced", 700, seed}, {"syn_linear", "linear", 400, seed},
            {"syn_categorical", "categorical", 600, seed}, {"syn_missing", "sparse_missing", 550, seed},
            {"syn_spirals", "spirals", 500, seed}};
}

std::string write_desk_suite(const std::string& dir, const std::string& public_dir, std::uint64_t seed)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    std::vector<fs::path> pub;
    if (!public_dir.empty() && fs::is_directory(public_dir))
        for (const auto& e : fs::directory_iterator(public_dir))
            if (e.path().extension() == ".csv")
                pub.push_back(fs::absolute(e.path()));
    std::sort(pub.begin(), pub.end());
    for (const auto& p : pub)
        entries.push_back({{"id", p.stem().string()}, {"path", p.string()}, {"target", "class"}});
    for (const auto& s : desk_synthetic_specs(seed)) {
        const auto path = fs::path(dir) / (s.id + ".csv");
        write_file_atomic(path.string(), to_csv(make_synthetic(s)));
        entries.push_back({{"id", s.id}, {"path", path.filename().string()}, {"target", "class"}});
    }
    nlohmann::ordered_json m;
    m["datasets"] = entries;
    const auto manifest = (fs::path(dir) / "manifest.json").string();
    write_file_atomic(manifest, m.dump(2) + "\n");
    return manifest;
}

} // namespace autobagging
