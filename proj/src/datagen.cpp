#include "pllab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pllab {

using nlohmann::json;

bool Dataset::has_truth() const {
    return !samples.empty() &&
           std::all_of(samples.begin(), samples.end(),
                       [](const Sample& s) { return s.y_true.has_value(); });
}

std::vector<std::vector<int>> build_distractor_pools(int m, double r_dpool, Rng& rng) {
    if (m < 2) throw std::invalid_argument("build_distractor_pools: need m >= 2");
    if (r_dpool <= 0.0 || r_dpool > 1.0)
        throw std::invalid_argument("build_distractor_pools: r_dpool must be in (0, 1]");
    const int pool_size = static_cast<int>(std::nearbyint(m * r_dpool));
    if (pool_size < 1)
        throw std::invalid_argument("build_distractor_pools: empty pool (r_dpool too small)");

    std::vector<std::vector<int>> pools(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) {
        std::vector<int> pool = {c};
        // draw pool_size - 1 labels from [0, m) \ {c}
        for (int idx : rng.sample_without_replacement(m - 1, pool_size - 1))
            pool.push_back(idx >= c ? idx + 1 : idx);
        std::sort(pool.begin(), pool.end());
        pools[static_cast<std::size_t>(c)] = std::move(pool);
    }
    return pools;
}

Dataset gen_small_consistent() {
    Dataset data;
    data.d = 10;
    data.m = 100;
    const Vec x(10, 1.0);
    for (int i = 0; i < 10; ++i) {
        std::vector<int> allowed = {0};
        for (int o = 1; o <= 10; ++o)
            if (o != i + 1) allowed.push_back(o);
        data.samples.push_back({x, LabelVector::from_indices(100, allowed), std::nullopt});
    }
    data.provenance = json{{"generator", "small-consistent"}}.dump();
    return data;
}

namespace {

std::vector<Vec> sample_hypercube_corners(int m, int d, Rng& rng) {
    std::set<std::vector<std::uint8_t>> seen;
    std::vector<Vec> corners;
    while (static_cast<int>(corners.size()) < m) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(d));
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_below(2));
        if (!seen.insert(bits).second) continue;
        Vec c(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) c[static_cast<std::size_t>(i)] = bits[static_cast<std::size_t>(i)];
        corners.push_back(std::move(c));
    }
    return corners;
}

void check_cluster_args(int n, int d, int m, double sigma) {
    if (n < 1 || d < 1 || m < 2) throw std::invalid_argument("generator: need n >= 1, d >= 1, m >= 2");
    if (sigma < 0.0) throw std::invalid_argument("generator: sigma must be >= 0");
    if (d < 63 && static_cast<std::uint64_t>(m) > (1ULL << d))
        throw std::invalid_argument("generator: m exceeds 2^d distinct corners");
}

}  // namespace

Dataset gen_large_consistent(int n, int d, int m, const DistractorPoolSpec& spec, double sigma,
                             Rng& rng) {
    check_cluster_args(n, d, m, sigma);
    if (spec.r_docc < 0.0 || spec.r_docc > 1.0)
        throw std::invalid_argument("gen_large_consistent: r_docc must be in [0, 1]");

    const auto corners = sample_hypercube_corners(m, d, rng);
    const auto pools = build_distractor_pools(m, spec.r_dpool, rng);

    Dataset data;
    data.d = d;
    data.m = m;
    data.samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m)));
        Vec x = corners[static_cast<std::size_t>(c)];
        for (double& xi : x) xi += sigma * rng.normal();
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m), 0);
        bits[static_cast<std::size_t>(c)] = 1;
        for (int cand : pools[static_cast<std::size_t>(c)]) {
            if (cand == c) continue;
            if (rng.next_double() < spec.r_docc) bits[static_cast<std::size_t>(cand)] = 1;
        }
        data.samples.push_back({std::move(x), LabelVector(std::move(bits)), c});
    }
    data.provenance = json{{"generator", "large-consistent"}, {"n", n},     {"d", d},
                           {"m", m},
                           {"r_dpool", spec.r_dpool},          {"r_docc", spec.r_docc},
                           {"sigma", sigma},                   {"seed", rng.seed()}}
                          .dump();
    return data;
}

Dataset gen_cluster_truth(int n, int d, int m, double sigma, Rng& rng) {
    check_cluster_args(n, d, m, sigma);
    const auto corners = sample_hypercube_corners(m, d, rng);

    Dataset data;
    data.d = d;
    data.m = m;
    data.samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m)));
        Vec x = corners[static_cast<std::size_t>(c)];
        for (double& xi : x) xi += sigma * rng.normal();
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(m), 0);
        bits[static_cast<std::size_t>(c)] = 1;
        data.samples.push_back({std::move(x), LabelVector(std::move(bits)), c});
    }
    data.provenance = json{{"generator", "cluster-truth"}, {"n", n},    {"d", d},
                           {"m", m},                        {"sigma", sigma},
                           {"seed", rng.seed()}}
                          .dump();
    return data;
}

NoiseMatrix::NoiseMatrix(int m, Vec entries) : m_(m), entries_(std::move(entries)) {
    if (m_ < 2 || entries_.size() != static_cast<std::size_t>(m_) * m_)
        throw std::invalid_argument("NoiseMatrix: bad shape");
    for (int i = 0; i < m_; ++i) {
        if ((*this)(i, i) != 1.0)
            throw std::invalid_argument("NoiseMatrix: diagonal entries must be 1");
        for (int j = 0; j < m_; ++j) {
            const double v = (*this)(i, j);
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("NoiseMatrix: entries must be in [0, 1]");
        }
    }
}

double NoiseMatrix::expected_distractors(int i) const {
    double s = 0.0;
    for (int j = 0; j < m_; ++j) s += (*this)(i, j);
    return s - 1.0;
}

NoiseMatrix NoiseMatrix::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("NoiseMatrix: cannot open " + path);
    std::vector<Vec> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("NoiseMatrix: empty CSV");
    const int m = static_cast<int>(rows.size());
    Vec entries;
    entries.reserve(static_cast<std::size_t>(m) * m);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != m)
            throw std::invalid_argument("NoiseMatrix: CSV is not square");
        entries.insert(entries.end(), row.begin(), row.end());
    }
    return NoiseMatrix(m, std::move(entries));
}

void NoiseMatrix::to_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("NoiseMatrix: cannot open " + path);
    out.precision(17);
    for (int i = 0; i < m_; ++i) {
        for (int j = 0; j < m_; ++j) out << (j ? "," : "") << (*this)(i, j);
        out << "\n";
    }
}

NoiseMatrix builtin_case_matrix(int case_id) {
    // Circulant 10x10 matrices; row i is the first row rotated right by i.
    static const std::array<std::array<double, 10>, 5> first_rows = {{
        {1, 0.5, 0, 0, 0, 0, 0, 0, 0, 0},
        {1, 0.3, 0, 0, 0, 0, 0, 0, 0, 0.3},
        {1, 0.5, 0.3, 0.1, 0, 0, 0, 0.1, 0.3, 0.5},
        {1, 0.2, 0.8, 0.8, 0.8, 0.4, 0.4, 0.2, 0.2, 0.2},
        {1, 0.9, 0.8, 0.8, 0.8, 0.7, 0.7, 0.6, 0.9, 0.9},
    }};
    if (case_id < 1 || case_id > 5)
        throw std::invalid_argument("builtin_case_matrix: case must be in 1..5");
    const auto& row0 = first_rows[static_cast<std::size_t>(case_id - 1)];
    Vec entries(100);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            entries[static_cast<std::size_t>(i) * 10 + j] = row0[static_cast<std::size_t>((j - i + 10) % 10)];
    return NoiseMatrix(10, std::move(entries));
}

Dataset apply_noise(const Dataset& truth, const NoiseMatrix& noise, Rng& rng) {
    if (!truth.has_truth())
        throw std::invalid_argument("apply_noise: dataset must carry y_true on every sample");
    if (noise.size() != truth.m)
        throw std::invalid_argument("apply_noise: matrix size does not match m");

    Dataset out;
    out.d = truth.d;
    out.m = truth.m;
    out.samples.reserve(truth.samples.size());
    for (const auto& s : truth.samples) {
        const int c = *s.y_true;
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(truth.m), 0);
        for (int j = 0; j < truth.m; ++j) {
            if (j == c) {
                bits[static_cast<std::size_t>(j)] = 1;  // diagonal is 1
                continue;
            }
            const double pj = noise(c, j);
            if (pj > 0.0 && rng.next_double() < pj) bits[static_cast<std::size_t>(j)] = 1;
        }
        out.samples.push_back({s.x, LabelVector(std::move(bits)), c});
    }
    json prov = json::parse(truth.provenance.empty() ? "{}" : truth.provenance);
    out.provenance = json{{"generator", "apply-noise"}, {"base", prov}, {"seed", rng.seed()}}.dump();
    return out;
}

std::array<Dataset, 3> split(const Dataset& data, const std::array<double, 3>& fractions,
                             Rng& rng) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw std::invalid_argument("split: fractions must be >= 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");

    std::vector<int> order(static_cast<std::size_t>(data.n()));
    for (int i = 0; i < data.n(); ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    const int n = data.n();
    int n0 = static_cast<int>(std::llround(fractions[0] * n));
    int n1 = static_cast<int>(std::llround(fractions[1] * n));
    n0 = std::min(n0, n);
    n1 = std::min(n1, n - n0);

    std::array<Dataset, 3> parts;
    const std::array<int, 3> sizes = {n0, n1, n - n0 - n1};
    int next = 0;
    for (int part = 0; part < 3; ++part) {
        auto& ds = parts[static_cast<std::size_t>(part)];
        ds.d = data.d;
        ds.m = data.m;
        ds.negative_sets = data.negative_sets;
        ds.provenance = data.provenance;
        for (int i = 0; i < sizes[static_cast<std::size_t>(part)]; ++i)
            ds.samples.push_back(data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(next++)])]);
    }
    return parts;
}

void save_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
    json header = {{"d", data.d}, {"m", data.m}, {"n", data.n()}};
    header["provenance"] = data.provenance.empty() ? json::object() : json::parse(data.provenance);
    out << header.dump() << "\n";
    for (const auto& s : data.samples) {
        json line = {{"x", s.x}, {"y", s.y.indices()}};
        if (s.y_true) line["y_true"] = *s.y_true;
        out << line.dump() << "\n";
    }
    for (const auto& yneg : data.negative_sets)
        out << json{{"y_neg", yneg.indices()}}.dump() << "\n";
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_jsonl: missing header line");
    const json header = json::parse(line);

    Dataset data;
    data.d = header.at("d").get<int>();
    data.m = header.at("m").get<int>();
    if (header.contains("provenance")) data.provenance = header["provenance"].dump();

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.contains("y_neg")) {
            const auto idx = j.at("y_neg").get<std::vector<int>>();
            data.negative_sets.push_back(LabelVector::from_indices(data.m, idx));
            continue;
        }
        Sample s{j.at("x").get<Vec>(),
                 LabelVector::from_indices(data.m, j.at("y").get<std::vector<int>>()),
                 std::nullopt};
        if (static_cast<int>(s.x.size()) != data.d)
            throw std::runtime_error("load_jsonl: sample dimension mismatch");
        if (j.contains("y_true")) s.y_true = j.at("y_true").get<int>();
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace pllab
