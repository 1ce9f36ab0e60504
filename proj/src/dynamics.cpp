#include "pllab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace pllab {

std::string_view termination_reason_name(TerminationReason r) {
    switch (r) {
        case TerminationReason::MaxSteps: return "max_steps";
        case TerminationReason::CoordAbove: return "coord_above";
        case TerminationReason::CoordBelow: return "coord_below";
        case TerminationReason::GradNorm: return "grad_norm";
        case TerminationReason::LossError: return "loss_error";
    }
    return "?";
}

namespace {

struct StepEval {
    Vec grad;     // summed over label sets
    double loss;  // summed over label sets
};

StepEval eval_step(const Vec& z, const Vec& p, const std::vector<LabelVector>& labels,
                   const DynamicsConfig& config) {
    StepEval e{Vec(z.size(), 0.0), 0.0};
    for (const auto& y : labels) {
        const LossResult r = evaluate(config.kind, z, p, y, config.params);
        e.loss += r.value;
        for (std::size_t j = 0; j < e.grad.size(); ++j) e.grad[j] += r.grad_logits[j];
    }
    return e;
}

std::optional<TerminationReason> check_stop(const StopRule& stop, const Vec& p, const Vec& grad) {
    if (stop.coord_above) {
        const auto& [i, thr] = *stop.coord_above;
        if (p[static_cast<std::size_t>(i)] > thr) return TerminationReason::CoordAbove;
    }
    if (stop.coord_below) {
        const auto& [i, thr] = *stop.coord_below;
        if (p[static_cast<std::size_t>(i)] < thr) return TerminationReason::CoordBelow;
    }
    if (stop.grad_norm_below) {
        double norm = 0.0;
        for (double g : grad) norm = std::max(norm, std::abs(g));
        if (norm < *stop.grad_norm_below) return TerminationReason::GradNorm;
    }
    return std::nullopt;
}

}  // namespace

Trajectory simulate(const Vec& z0, const std::vector<LabelVector>& labels,
                    const DynamicsConfig& config) {
    if (labels.empty()) throw std::invalid_argument("simulate: need at least one label set");
    const int m = static_cast<int>(z0.size());
    for (const auto& y : labels)
        if (y.size() != m) throw std::invalid_argument("simulate: label set length mismatch");
    if (!all_finite(z0)) throw std::invalid_argument("simulate: non-finite z0");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("simulate: learning rate must be > 0");
    if (config.max_steps < 1) throw std::invalid_argument("simulate: max_steps must be >= 1");
    if (config.record_every < 1) throw std::invalid_argument("simulate: record_every must be >= 1");

    Trajectory traj;
    Vec z = z0;
    for (int t = 0; t <= config.max_steps; ++t) {
        Vec p = softmax(z);
        StepEval e;
        try {
            e = eval_step(z, p, labels, config);
        } catch (const std::exception& ex) {
            traj.reason = TerminationReason::LossError;
            traj.error = ex.what();
            return traj;
        }
        const bool on_cadence = t % config.record_every == 0 || t == config.max_steps;
        if (on_cadence) traj.points.push_back({t, z, p, e.loss});
        if (auto hit = check_stop(config.stop, p, e.grad)) {
            if (!on_cadence) traj.points.push_back({t, z, p, e.loss});
            traj.reason = *hit;
            return traj;
        }
        if (t == config.max_steps) break;
        for (std::size_t j = 0; j < z.size(); ++j) z[j] -= config.learning_rate * e.grad[j];
        if (!all_finite(z)) {
            traj.reason = TerminationReason::LossError;
            traj.error = "non-finite logits after update";
            return traj;
        }
    }
    traj.reason = TerminationReason::MaxSteps;
    return traj;
}

LimitReport detect_winner_take_all(const Trajectory& traj, const LabelVector& y, double tol,
                                   double tie_tol) {
    if (traj.points.empty()) throw std::invalid_argument("detect_winner_take_all: empty trajectory");
    const Vec& p0 = traj.front().p;
    if (static_cast<int>(p0.size()) != y.size())
        throw std::invalid_argument("detect_winner_take_all: label length mismatch");

    double best = -1.0;
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i)) best = std::max(best, p0[static_cast<std::size_t>(i)]);

    LimitReport report;
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i) && p0[static_cast<std::size_t>(i)] >= best - tie_tol)
            report.argmax_set.push_back(i);

    report.limit_estimate = traj.back().p;
    const double target = 1.0 / static_cast<double>(report.argmax_set.size());
    report.converged = true;
    std::size_t next = 0;
    for (int i = 0; i < y.size(); ++i) {
        const double pi = report.limit_estimate[static_cast<std::size_t>(i)];
        const bool in_j = next < report.argmax_set.size() && report.argmax_set[next] == i;
        if (in_j) {
            ++next;
            if (std::abs(pi - target) > tol) report.converged = false;
        } else if (pi > tol) {
            report.converged = false;
        }
    }
    return report;
}

std::vector<FieldSample> vector_field(LossKind kind, const LabelVector& y, int resolution,
                                      double margin, const LossParams& params) {
    if (y.size() != 3)
        throw std::invalid_argument("vector_field: ternary grid requires m = 3");
    if (resolution < 2) throw std::invalid_argument("vector_field: resolution must be >= 2");

    std::vector<FieldSample> field;
    for (int i = 0; i <= resolution; ++i) {
        for (int j = 0; j + i <= resolution; ++j) {
            Vec p = {static_cast<double>(i) / resolution, static_cast<double>(j) / resolution,
                     static_cast<double>(resolution - i - j) / resolution};
            if (std::any_of(p.begin(), p.end(), [&](double v) { return v < margin; })) continue;
            Vec z(3);
            for (int c = 0; c < 3; ++c) z[static_cast<std::size_t>(c)] = std::log(p[static_cast<std::size_t>(c)]);
            const LossResult r = evaluate(kind, z, p, y, params);
            const double pg = dot(p, r.grad_logits);
            FieldSample s;
            s.p = p;
            s.dp.resize(3);
            double norm = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double g = r.grad_logits[static_cast<std::size_t>(c)];
                s.dp[static_cast<std::size_t>(c)] = -p[static_cast<std::size_t>(c)] * (g - pg);
                norm += g * g;
            }
            s.grad_norm = std::sqrt(norm);
            field.push_back(std::move(s));
        }
    }
    return field;
}

std::optional<int> first_step(const Trajectory& traj,
                              const std::function<bool(const TrajectoryPoint&)>& pred) {
    for (const auto& pt : traj.points)
        if (pred(pt)) return pt.t;
    return std::nullopt;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    if (traj.points.empty()) return;
    const std::size_t m = traj.front().z.size();
    out << "t";
    for (std::size_t i = 1; i <= m; ++i) out << ",z" << i;
    for (std::size_t i = 1; i <= m; ++i) out << ",p" << i;
    out << ",loss\n";
    out.precision(17);
    for (const auto& pt : traj.points) {
        out << pt.t;
        for (double z : pt.z) out << "," << z;
        for (double p : pt.p) out << "," << p;
        out << "," << pt.loss << "\n";
    }
}

void write_field_csv(const std::vector<FieldSample>& field, std::ostream& out) {
    out << "p1,p2,p3,dp1,dp2,dp3,grad_norm\n";
    out.precision(17);
    for (const auto& s : field) {
        out << s.p[0] << "," << s.p[1] << "," << s.p[2] << "," << s.dp[0] << "," << s.dp[1] << ","
            << s.dp[2] << "," << s.grad_norm << "\n";
    }
}

std::string trajectory_to_json(const Trajectory& traj) {
    nlohmann::json j;
    j["termination"] = std::string(termination_reason_name(traj.reason));
    if (!traj.error.empty()) j["error"] = traj.error;
    nlohmann::json points = nlohmann::json::array();
    for (const auto& pt : traj.points)
        points.push_back({{"t", pt.t}, {"z", pt.z}, {"p", pt.p}, {"loss", pt.loss}});
    j["points"] = std::move(points);
    return j.dump(2);
}

std::string field_to_json(const std::vector<FieldSample>& field) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : field)
        samples.push_back({{"p", s.p}, {"dp", s.dp}, {"grad_norm", s.grad_norm}});
    return nlohmann::json{{"samples", std::move(samples)}}.dump(2);
}

}  // namespace pllab
