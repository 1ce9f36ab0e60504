#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pllab/numkit.hpp"

namespace pllab {

/// Binary indicator over the m outputs marking which are allowed (y_i = 1).
/// Invariants: m >= 2 and 1 <= k <= m where k is the popcount. k = m is legal
/// but degenerate (no disallowed output); loss functions that need a
/// disallowed term reject it.
class LabelVector {
public:
    explicit LabelVector(std::vector<std::uint8_t> bits);
    static LabelVector from_indices(int m, std::span<const int> allowed);

    int size() const { return static_cast<int>(bits_.size()); }
    int count() const { return k_; }
    bool allowed(int i) const { return bits_[static_cast<std::size_t>(i)] != 0; }
    bool all_allowed() const { return k_ == size(); }
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::vector<int> indices() const;

    bool operator==(const LabelVector& o) const { return bits_ == o.bits_; }

private:
    std::vector<std::uint8_t> bits_;
    int k_ = 0;
};

/// Loss value together with its analytic gradient with respect to the logits
/// feeding the softmax.
struct LossResult {
    double value = 0.0;
    Vec grad_logits;
};

enum class LossKind { Nll, Libra, Sag, Uniform, Merit, Lws, Rc };

LossKind loss_kind_from_name(std::string_view name);
std::string_view loss_kind_name(LossKind kind);
const std::vector<LossKind>& all_loss_kinds();
/// True for losses defined on raw logits rather than probabilities (LWS).
bool loss_uses_raw_logits(LossKind kind);

struct LossParams {
    double beta = 0.5;              // merit in [0,1], lws > 0
    bool libra_fit_weight = false;  // scale libra value and gradient by 1 - p_hat
    double logit_l2_gamma = 0.0;    // gamma_z: adds gamma_z * sum z_j^2 (sag stabilizer)
    double neg_gamma = 0.0;         // weight of the negative-supervision term
    int neg_sample_count = 50;      // label sets sampled per step for the negative term
    bool tolerant = false;          // clamp boundary quantities instead of throwing
    bool lws_decreasing_sigma = true;  // sigma(t) = 1/(1+e^t) as printed; false flips to 1/(1+e^-t)
};

/// p_hat = sum_i y_i p_i, the model mass on allowed outputs.
double allowed_mass(std::span<const double> p, const LabelVector& y);

// Every loss below returns the gradient with respect to the logits z of the
// softmax producing p. Identification weights (merit, lws, rc) are recomputed
// from the inputs on each call and treated as constants under differentiation.

/// -log(p_hat). Gradient: grad_j = (p_j / p_hat) (p_hat - y_j).
LossResult nll(std::span<const double> p, const LabelVector& y, const LossParams& params = {});

/// log(1 - p_hat) - (1/k) sum_allowed log p_i.
/// Gradient: -1/k on allowed logits, p_j / (1 - p_hat) on disallowed ones.
/// With libra_fit_weight on, value and gradient are both scaled by 1 - p_hat.
LossResult libra(std::span<const double> p, const LabelVector& y, const LossParams& params = {});

/// (1/(m-k)) sum_disallowed log p_i - (1/k) sum_allowed log p_i.
/// Gradient is the constant vector (-1/k on allowed, 1/(m-k) on disallowed).
/// The overload taking z adds the logit L2 stabilizer gamma_z * sum z_j^2
/// when params.logit_l2_gamma > 0. Requires k <= m-1.
LossResult sag(std::span<const double> p, const LabelVector& y, const LossParams& params = {});
LossResult sag(std::span<const double> p, const LabelVector& y, std::span<const double> z,
               const LossParams& params = {});

/// -sum_allowed log p_i. Gradient: grad_j = k p_j - y_j.
LossResult uniform_loss(std::span<const double> p, const LabelVector& y, const LossParams& params = {});

/// -sum_i w_i log p_i with w_i proportional to y_i (p_i/p_hat)^beta,
/// normalized over allowed outputs and frozen. Gradient: grad_j = p_j - w_j.
LossResult merit(std::span<const double> p, const LabelVector& y, double beta,
                 const LossParams& params = {});

/// sum_allowed w_i s(z_i) + beta sum_disallowed w_i s(-z_i) on raw logits,
/// s(t) = 1/(1+e^t), weights softmax-normalized within each class and frozen.
/// Requires k <= m-1.
LossResult lws(std::span<const double> z, const LabelVector& y, double beta,
               const LossParams& params = {});

/// -(1/2) sum_allowed w_i log p_i with w_i = p_i / p_hat frozen.
/// Gradient: grad_j = (1/2)(p_j sum_i y_i w_i - y_j w_j).
LossResult rc(std::span<const double> p, const LabelVector& y, const LossParams& params = {});

// Identification weights and the frozen-weight loss values, exposed so
// finite-difference oracles can hold the weights fixed while perturbing the
// logits.
Vec merit_weights(std::span<const double> p, const LabelVector& y, double beta,
                  const LossParams& params = {});
Vec lws_weights(std::span<const double> z, const LabelVector& y);
Vec rc_weights(std::span<const double> p, const LabelVector& y, const LossParams& params = {});
double merit_value_frozen(std::span<const double> p, const LabelVector& y, std::span<const double> w,
                          const LossParams& params = {});
double lws_value_frozen(std::span<const double> z, const LabelVector& y, std::span<const double> w,
                        double beta, const LossParams& params = {});
double rc_value_frozen(std::span<const double> p, const LabelVector& y, std::span<const double> w,
                       const LossParams& params = {});

/// Dispatch on kind. z and p must describe the same state (p = softmax(z));
/// probability losses read p, lws reads z, the sag stabilizer reads both.
LossResult evaluate(LossKind kind, std::span<const double> z, std::span<const double> p,
                    const LabelVector& y, const LossParams& params = {});

/// Negative-supervision term: samples min(neg_sample_count, |neg_label_sets|)
/// label sets without replacement and returns -sum of the base loss over the
/// sample (unweighted; the gamma factor is applied by the combiner).
/// An empty set yields a zero term.
LossResult negative_term(LossKind kind, std::span<const double> z, std::span<const double> p,
                         const std::vector<LabelVector>& neg_label_sets, Rng& rng,
                         const LossParams& params = {});

/// L(p, y) + neg_gamma * L_neg(p); equals the base loss when neg_gamma = 0 or
/// there are no negative sets.
LossResult combined_with_negatives(LossKind kind, std::span<const double> z,
                                   std::span<const double> p, const LabelVector& y,
                                   const std::vector<LabelVector>& neg_label_sets, Rng& rng,
                                   const LossParams& params = {});

}  // namespace pllab
