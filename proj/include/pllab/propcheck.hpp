#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pllab/dynamics.hpp"
#include "pllab/losses.hpp"

namespace pllab {

/// Any deterministic loss value on explicit probabilities. The checkers only
/// ever call `value`; gradients are obtained by finite differences.
struct BlackBoxLoss {
    std::function<double(std::span<const double> p, const LabelVector& y)> value;
};

/// Built-in loss as a black box. For identification-based losses (merit, rc)
/// the weights are recomputed at every evaluation point.
BlackBoxLoss black_box(LossKind kind, const LossParams& params = {});

/// Built-in loss with identification weights frozen at p0 — the function the
/// gradient theory differentiates. Identical to black_box for weightless
/// losses. lws is defined on raw logits and has no probability black box.
BlackBoxLoss black_box_frozen_at(LossKind kind, const Vec& p0, const LabelVector& y,
                                 const LossParams& params = {});

/// Analytic dL/dp with identification weights frozen; the reference the FD
/// oracle is checked against.
Vec analytic_grad_p(LossKind kind, std::span<const double> p, const LabelVector& y,
                    const LossParams& params = {});

struct FdOptions {
    double h = 1e-6;  // central-difference step on each p coordinate
};

/// Central differences (L(p + h e_i) - L(p - h e_i)) / 2h per coordinate.
/// Perturbations leave the simplex; the residual formula consumes raw
/// partials. Requires interior p with margin > 2h and h in [1e-8, 1e-4].
Vec fd_grad_p(const BlackBoxLoss& loss, std::span<const double> p, const LabelVector& y,
              double h = 1e-6);

/// Ratio-preservation residual at one point: with G_m = sum_i dL/dp_i *
/// p_i (delta_im - p_m) for allowed m, returns max over allowed pairs of
/// |G_m - G_n| / max(1, max |G|). Zero residual characterizes losses whose
/// gradient update preserves allowed-pair probability ratios. Partials come
/// from fd_grad_p unless analytic partials are supplied. Requires k >= 2.
double prp_residual(const BlackBoxLoss& loss, std::span<const double> p, const LabelVector& y,
                    const FdOptions& fd = {}, const Vec* analytic_partials = nullptr);

/// Same residual over allowed pairs and over disallowed pairs; a class with
/// fewer than two members contributes zero. Requires at least one class with
/// two members.
std::pair<double, double> biprp_residual(const BlackBoxLoss& loss, std::span<const double> p,
                                         const LabelVector& y, const FdOptions& fd = {},
                                         const Vec* analytic_partials = nullptr);

enum class Property { Prp, BiPrp };

struct PointResidual {
    Vec p;
    std::vector<int> allowed;
    double allowed_residual = 0.0;
    double disallowed_residual = 0.0;
};

struct ResidualReport {
    Property property = Property::Prp;
    double tolerance = 0.0;
    double max_allowed = 0.0;
    double max_disallowed = 0.0;  // only meaningful for BiPrp
    bool pass = false;
    std::vector<PointResidual> points;

    std::string to_json() const;
};

struct SamplePlan {
    std::vector<int> ms = {3, 10};  // output-space sizes to probe
    int points_per_m = 200;
    std::uint64_t seed = 0;
    double margin = 1e-3;
};

/// Residual check over random interior points: for each m, draws Dirichlet(1)
/// points (clamped to the margin) and random label vectors with 2 <= k <= m-1,
/// evaluating the residual at each. Passes when every residual the property
/// constrains stays below the tolerance.
ResidualReport check_property(const BlackBoxLoss& loss, Property property, const SamplePlan& plan,
                              double tolerance);

/// Same check for a built-in loss, freezing identification weights at each
/// probe point before differencing — the function a Gradient-update actually
/// descends.
ResidualReport check_property(LossKind kind, const LossParams& params, Property property,
                              const SamplePlan& plan, double tolerance);

/// Uniform interior point of the m-simplex: Dirichlet(1,...,1) followed by a
/// clamp to `margin` and renormalization.
Vec random_interior_point(int m, Rng& rng, double margin = 1e-3);

struct RatioDrift {
    double allowed = 0.0;
    double disallowed = 0.0;
};

/// Simulates `steps` gradient updates from z0 and reports the worst relative
/// change of any same-class pair ratio p_a/p_b over the whole run.
RatioDrift ratio_drift(LossKind kind, const Vec& z0, const LabelVector& y, double learning_rate,
                       int steps, const LossParams& params = {});

/// Sum of the analytic logit gradient; zero (to rounding) for every
/// probability-defined loss.
double gradient_sum(LossKind kind, std::span<const double> z, std::span<const double> p,
                    const LabelVector& y, const LossParams& params = {});

}  // namespace pllab
