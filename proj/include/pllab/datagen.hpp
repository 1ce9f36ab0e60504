#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pllab/losses.hpp"
#include "pllab/numkit.hpp"

namespace pllab {

struct Sample {
    Vec x;
    LabelVector y;
    std::optional<int> y_true;  // hidden true label; always allowed when present
};

struct Dataset {
    int d = 0;
    int m = 0;
    std::vector<Sample> samples;
    std::vector<LabelVector> negative_sets;  // globally forbidden label sets (may be empty)
    std::string provenance;                  // JSON text recording generator, params, seed

    int n() const { return static_cast<int>(samples.size()); }
    bool has_truth() const;
};

struct DistractorPoolSpec {
    double r_dpool = 0.5;  // fraction of outputs eligible as distractors, in (0, 1]
    double r_docc = 0.5;   // per-distractor occurrence probability, in [0, 1]
};

/// Distractor pools D(c) for each true label c: c itself plus
/// round(m * r_dpool) - 1 other labels drawn uniformly without replacement
/// (round = nearest, ties to even). Every pool has the same size and c in D(c).
std::vector<std::vector<int>> build_distractor_pools(int m, double r_dpool, Rng& rng);

/// The small consistent dataset: m = 100 outputs, n = 10 samples sharing one
/// input (all-ones, d = 10). Sample i allows output 0 together with every
/// output in {1..10} except i+1, so output 0 is the only label consistent
/// with all samples.
Dataset gen_small_consistent();

/// The large consistent dataset: m distinct corners of {0,1}^d as centroids of
/// an equal-weight Gaussian mixture (std sigma), n inputs with y_true the
/// generating component, distractors drawn i.i.d. Bernoulli(r_docc) from the
/// pool of the true label.
Dataset gen_large_consistent(int n, int d, int m, const DistractorPoolSpec& spec, double sigma,
                             Rng& rng);

/// Truth-labeled Gaussian clusters with exact one-hot supervision; a base
/// dataset for noise-matrix corruption.
Dataset gen_cluster_truth(int n, int d, int m, double sigma, Rng& rng);

/// m x m label-dependent distractor probability matrix: M[i][j] is the
/// probability of j entering the label set given true label i. Diagonal is 1.
class NoiseMatrix {
public:
    NoiseMatrix(int m, Vec entries);
    int size() const { return m_; }
    double operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i) * m_ + j]; }
    /// Expected distractor count for row i: row sum minus the diagonal 1.
    double expected_distractors(int i) const;

    static NoiseMatrix from_csv(const std::string& path);
    void to_csv(const std::string& path) const;

private:
    int m_ = 0;
    Vec entries_;
};

/// The five built-in 10x10 noise models (case 1..5), expected distractor
/// counts 0.5, 0.6, 1.8, 4.0, 7.1.
NoiseMatrix builtin_case_matrix(int case_id);

/// Replaces each sample's label set: bit j is set independently with
/// probability M[y_true][j]. Requires truth labels; corruption is
/// instance-independent.
Dataset apply_noise(const Dataset& truth, const NoiseMatrix& noise, Rng& rng);

/// Seeded shuffle followed by a disjoint covering partition. The first two
/// part sizes are round(fraction * n); the remainder goes to the third part.
std::array<Dataset, 3> split(const Dataset& data, const std::array<double, 3>& fractions,
                             Rng& rng);

/// JSON-lines format: a header line {"d","m","n","provenance"}, one line per
/// sample {"x","y"[,"y_true"]}, then one line {"y_neg"} per negative set.
/// Doubles round-trip bit-exactly.
void save_jsonl(const Dataset& data, const std::string& path);
Dataset load_jsonl(const std::string& path);

}  // namespace pllab
