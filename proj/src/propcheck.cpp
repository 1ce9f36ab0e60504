#include "pllab/propcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace pllab {

namespace {

double value_of(LossKind kind, std::span<const double> p, const LabelVector& y,
                const LossParams& params) {
    switch (kind) {
        case LossKind::Nll: return nll(p, y, params).value;
        case LossKind::Libra: return libra(p, y, params).value;
        case LossKind::Sag: return sag(p, y, params).value;
        case LossKind::Uniform: return uniform_loss(p, y, params).value;
        case LossKind::Merit: {
            const Vec w = merit_weights(p, y, params.beta, params);
            return merit_value_frozen(p, y, w, params);
        }
        case LossKind::Rc: {
            const Vec w = rc_weights(p, y, params);
            return rc_value_frozen(p, y, w, params);
        }
        case LossKind::Lws:
            throw std::invalid_argument("black_box: lws is defined on raw logits, not probabilities");
    }
    throw std::invalid_argument("black_box: bad loss kind");
}

}  // namespace

BlackBoxLoss black_box(LossKind kind, const LossParams& params) {
    return {[kind, params](std::span<const double> p, const LabelVector& y) {
        return value_of(kind, p, y, params);
    }};
}

BlackBoxLoss black_box_frozen_at(LossKind kind, const Vec& p0, const LabelVector& y0,
                                 const LossParams& params) {
    switch (kind) {
        case LossKind::Merit: {
            Vec w = merit_weights(p0, y0, params.beta, params);
            return {[w = std::move(w), params](std::span<const double> p, const LabelVector& y) {
                return merit_value_frozen(p, y, w, params);
            }};
        }
        case LossKind::Rc: {
            Vec w = rc_weights(p0, y0, params);
            return {[w = std::move(w), params](std::span<const double> p, const LabelVector& y) {
                return rc_value_frozen(p, y, w, params);
            }};
        }
        case LossKind::Libra:
            if (params.libra_fit_weight) {
                // the fit weight is a frozen scalar, like identification weights
                const double w_fit = std::max(1.0 - allowed_mass(p0, y0), 0.0);
                LossParams base = params;
                base.libra_fit_weight = false;
                return {[w_fit, base](std::span<const double> p, const LabelVector& y) {
                    return w_fit * libra(p, y, base).value;
                }};
            }
            return black_box(kind, params);
        default:
            return black_box(kind, params);
    }
}

Vec analytic_grad_p(LossKind kind, std::span<const double> p, const LabelVector& y,
                    const LossParams& params) {
    const int m = y.size();
    Vec g(p.size(), 0.0);
    switch (kind) {
        case LossKind::Nll: {
            const double p_hat = allowed_mass(p, y);
            for (int i = 0; i < m; ++i)
                if (y.allowed(i)) g[static_cast<std::size_t>(i)] = -1.0 / p_hat;
            return g;
        }
        case LossKind::Libra: {
            const double p_hat = allowed_mass(p, y);
            const double w = params.libra_fit_weight ? std::max(1.0 - p_hat, 0.0) : 1.0;
            const int k = y.count();
            for (int i = 0; i < m; ++i)
                if (y.allowed(i))
                    g[static_cast<std::size_t>(i)] =
                        w * (-1.0 / (1.0 - p_hat) - 1.0 / (k * p[static_cast<std::size_t>(i)]));
            return g;
        }
        case LossKind::Sag: {
            const int k = y.count();
            if (k == m) throw std::invalid_argument("analytic_grad_p: sag needs k < m");
            for (int i = 0; i < m; ++i)
                g[static_cast<std::size_t>(i)] = y.allowed(i)
                                                     ? -1.0 / (k * p[static_cast<std::size_t>(i)])
                                                     : 1.0 / ((m - k) * p[static_cast<std::size_t>(i)]);
            return g;
        }
        case LossKind::Uniform: {
            for (int i = 0; i < m; ++i)
                if (y.allowed(i)) g[static_cast<std::size_t>(i)] = -1.0 / p[static_cast<std::size_t>(i)];
            return g;
        }
        case LossKind::Merit: {
            const Vec w = merit_weights(p, y, params.beta, params);
            for (int i = 0; i < m; ++i)
                if (y.allowed(i))
                    g[static_cast<std::size_t>(i)] = -w[static_cast<std::size_t>(i)] / p[static_cast<std::size_t>(i)];
            return g;
        }
        case LossKind::Rc: {
            const Vec w = rc_weights(p, y, params);
            for (int i = 0; i < m; ++i)
                if (y.allowed(i))
                    g[static_cast<std::size_t>(i)] =
                        -0.5 * w[static_cast<std::size_t>(i)] / p[static_cast<std::size_t>(i)];
            return g;
        }
        case LossKind::Lws:
            throw std::invalid_argument("analytic_grad_p: lws has no probability gradient");
    }
    throw std::invalid_argument("analytic_grad_p: bad loss kind");
}

Vec fd_grad_p(const BlackBoxLoss& loss, std::span<const double> p, const LabelVector& y,
              double h) {
    if (h < 1e-8 || h > 1e-4) throw std::invalid_argument("fd_grad_p: h must be in [1e-8, 1e-4]");
    for (double pi : p)
        if (pi <= 2.0 * h || pi >= 1.0 - 2.0 * h)
            throw std::invalid_argument("fd_grad_p: point too close to the simplex boundary");

    Vec g(p.size());
    Vec work(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = work[i];
        work[i] = orig + h;
        const double up = loss.value(work, y);
        work[i] = orig - h;
        const double down = loss.value(work, y);
        work[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

namespace {

// G_m = sum_i dL/dp_i * p_i (delta_im - p_m): the logit gradient induced by
// the probability partials through the softmax Jacobian.
Vec induced_logit_grads(std::span<const double> partials, std::span<const double> p) {
    double weighted = 0.0;  // sum_i dL/dp_i * p_i
    for (std::size_t i = 0; i < p.size(); ++i) weighted += partials[i] * p[i];
    Vec g(p.size());
    for (std::size_t mth = 0; mth < p.size(); ++mth)
        g[mth] = partials[mth] * p[mth] - weighted * p[mth];
    return g;
}

double class_residual(const Vec& g, const LabelVector& y, bool allowed_class) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    int count = 0;
    for (int i = 0; i < y.size(); ++i) {
        if (y.allowed(i) != allowed_class) continue;
        lo = std::min(lo, g[static_cast<std::size_t>(i)]);
        hi = std::max(hi, g[static_cast<std::size_t>(i)]);
        ++count;
    }
    if (count < 2) return 0.0;
    double scale = 1.0;
    for (double gi : g) scale = std::max(scale, std::abs(gi));
    return (hi - lo) / scale;
}

Vec partials_for(const BlackBoxLoss& loss, std::span<const double> p, const LabelVector& y,
                 const FdOptions& fd, const Vec* analytic) {
    if (analytic) {
        if (analytic->size() != p.size())
            throw std::invalid_argument("residual: analytic partial length mismatch");
        return *analytic;
    }
    return fd_grad_p(loss, p, y, fd.h);
}

}  // namespace

double prp_residual(const BlackBoxLoss& loss, std::span<const double> p, const LabelVector& y,
                    const FdOptions& fd, const Vec* analytic_partials) {
    if (y.count() < 2) throw std::invalid_argument("prp_residual: property is vacuous for k < 2");
    const Vec partials = partials_for(loss, p, y, fd, analytic_partials);
    const Vec g = induced_logit_grads(partials, p);
    return class_residual(g, y, /*allowed_class=*/true);
}

std::pair<double, double> biprp_residual(const BlackBoxLoss& loss, std::span<const double> p,
                                         const LabelVector& y, const FdOptions& fd,
                                         const Vec* analytic_partials) {
    const int k = y.count();
    const int m = y.size();
    if (k < 2 && m - k < 2)
        throw std::invalid_argument("biprp_residual: no pair of outputs shares a class");
    const Vec partials = partials_for(loss, p, y, fd, analytic_partials);
    const Vec g = induced_logit_grads(partials, p);
    return {class_residual(g, y, true), class_residual(g, y, false)};
}

Vec random_interior_point(int m, Rng& rng, double margin) {
    if (m < 2) throw std::invalid_argument("random_interior_point: need m >= 2");
    if (margin <= 0.0 || margin >= 1.0 / m)
        throw std::invalid_argument("random_interior_point: margin must be in (0, 1/m)");
    Vec p(static_cast<std::size_t>(m));
    double sum = 0.0;
    for (double& pi : p) {
        // exponential spacings give Dirichlet(1,...,1) after normalization
        pi = -std::log(1.0 - rng.next_double());
        sum += pi;
    }
    for (double& pi : p) pi = std::max(pi / sum, margin);
    sum = 0.0;
    for (double pi : p) sum += pi;
    for (double& pi : p) pi /= sum;
    return p;
}

namespace {

using LossAtPoint = std::function<BlackBoxLoss(const Vec& p, const LabelVector& y)>;

ResidualReport run_check(const LossAtPoint& loss_at, Property property, const SamplePlan& plan,
                         double tolerance) {
    if (tolerance <= 0.0) throw std::invalid_argument("check_property: tolerance must be > 0");
    Rng rng(plan.seed);
    ResidualReport report;
    report.property = property;
    report.tolerance = tolerance;

    for (int m : plan.ms) {
        if (m < 3) throw std::invalid_argument("check_property: need m >= 3");
        for (int pt = 0; pt < plan.points_per_m; ++pt) {
            const Vec p = random_interior_point(m, rng, plan.margin);
            const int k = 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m - 2)));
            const auto allowed = rng.sample_without_replacement(m, k);
            const LabelVector y = LabelVector::from_indices(m, allowed);
            const BlackBoxLoss loss = loss_at(p, y);

            PointResidual pr;
            pr.p = p;
            pr.allowed = y.indices();
            if (property == Property::Prp) {
                pr.allowed_residual = prp_residual(loss, p, y);
            } else {
                const auto [a, d] = biprp_residual(loss, p, y);
                pr.allowed_residual = a;
                pr.disallowed_residual = d;
            }
            report.max_allowed = std::max(report.max_allowed, pr.allowed_residual);
            report.max_disallowed = std::max(report.max_disallowed, pr.disallowed_residual);
            report.points.push_back(std::move(pr));
        }
    }
    report.pass = report.max_allowed < tolerance &&
                  (property == Property::Prp || report.max_disallowed < tolerance);
    return report;
}

}  // namespace

ResidualReport check_property(const BlackBoxLoss& loss, Property property, const SamplePlan& plan,
                              double tolerance) {
    return run_check([&loss](const Vec&, const LabelVector&) { return loss; }, property, plan,
                     tolerance);
}

ResidualReport check_property(LossKind kind, const LossParams& params, Property property,
                              const SamplePlan& plan, double tolerance) {
    return run_check(
        [kind, &params](const Vec& p, const LabelVector& y) {
            return black_box_frozen_at(kind, p, y, params);
        },
        property, plan, tolerance);
}

std::string ResidualReport::to_json() const {
    nlohmann::json j;
    j["property"] = property == Property::Prp ? "prp" : "biprp";
    j["tolerance"] = tolerance;
    j["max_allowed_residual"] = max_allowed;
    if (property == Property::BiPrp) j["max_disallowed_residual"] = max_disallowed;
    j["pass"] = pass;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : points) {
        nlohmann::json pj = {{"p", pt.p},
                             {"allowed", pt.allowed},
                             {"allowed_residual", pt.allowed_residual}};
        if (property == Property::BiPrp) pj["disallowed_residual"] = pt.disallowed_residual;
        pts.push_back(std::move(pj));
    }
    j["points"] = std::move(pts);
    return j.dump(2);
}

RatioDrift ratio_drift(LossKind kind, const Vec& z0, const LabelVector& y, double learning_rate,
                       int steps, const LossParams& params) {
    DynamicsConfig config;
    config.kind = kind;
    config.params = params;
    config.learning_rate = learning_rate;
    config.max_steps = steps;
    const Trajectory traj = simulate(z0, {y}, config);
    if (traj.reason == TerminationReason::LossError)
        throw std::runtime_error("ratio_drift: simulation failed: " + traj.error);

    const Vec& p0 = traj.front().p;
    RatioDrift drift;
    for (int a = 0; a < y.size(); ++a) {
        for (int b = a + 1; b < y.size(); ++b) {
            if (y.allowed(a) != y.allowed(b)) continue;
            const double r0 = p0[static_cast<std::size_t>(a)] / p0[static_cast<std::size_t>(b)];
            double worst = 0.0;
            for (const auto& pt : traj.points) {
                const double r = pt.p[static_cast<std::size_t>(a)] / pt.p[static_cast<std::size_t>(b)];
                worst = std::max(worst, std::abs(r / r0 - 1.0));
            }
            auto& slot = y.allowed(a) ? drift.allowed : drift.disallowed;
            slot = std::max(slot, worst);
        }
    }
    return drift;
}

double gradient_sum(LossKind kind, std::span<const double> z, std::span<const double> p,
                    const LabelVector& y, const LossParams& params) {
    const LossResult r = evaluate(kind, z, p, y, params);
    double s = 0.0;
    for (double g : r.grad_logits) s += g;
    return s;
}

}  // namespace pllab
