#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pllab/losses.hpp"

namespace pllab {

/// Stop predicates checked against every recorded state (including t = 0).
struct StopRule {
    std::optional<std::pair<int, double>> coord_above;  // stop when p[i] > thr
    std::optional<std::pair<int, double>> coord_below;  // stop when p[i] < thr
    std::optional<double> grad_norm_below;              // stop when ||grad||_inf < eps
};

struct DynamicsConfig {
    LossKind kind = LossKind::Nll;
    LossParams params;
    double learning_rate = 1.0;
    int max_steps = 1000;
    StopRule stop;
    int record_every = 1;  // trajectory keeps every Nth step (plus first and last)
};

enum class TerminationReason { MaxSteps, CoordAbove, CoordBelow, GradNorm, LossError };
std::string_view termination_reason_name(TerminationReason r);

struct TrajectoryPoint {
    int t = 0;
    Vec z;
    Vec p;
    double loss = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    TerminationReason reason = TerminationReason::MaxSteps;
    std::string error;  // populated when reason == LossError

    const TrajectoryPoint& front() const { return points.front(); }
    const TrajectoryPoint& back() const { return points.back(); }
    int steps() const { return static_cast<int>(points.size()) - 1; }
};

/// Iterates z <- z - lr * sum over label sets of grad_logits(softmax(z), y),
/// recording (t, z, p, loss) at every step. Equivalent to softmax regression
/// with a one-hot input, which makes the logits directly updateable. The
/// recorded loss is the summed loss over the label sets.
Trajectory simulate(const Vec& z0, const std::vector<LabelVector>& labels,
                    const DynamicsConfig& config);

struct LimitReport {
    std::vector<int> argmax_set;  // allowed outputs with maximal initial probability
    Vec limit_estimate;           // final recorded distribution
    bool converged = false;       // final p within tol of uniform on the argmax set
};

/// Detects winner-take-all limits: the argmax set J is computed from the
/// initial allowed probabilities (ties within tie_tol), and convergence means
/// |p_j - 1/|J|| <= tol on J and p_j <= tol elsewhere at the final step.
LimitReport detect_winner_take_all(const Trajectory& traj, const LabelVector& y, double tol,
                                   double tie_tol = 1e-12);

struct FieldSample {
    Vec p;            // grid point on the simplex
    Vec dp;           // induced instantaneous probability motion
    double grad_norm; // Euclidean norm of the logit gradient
};

/// Samples the gradient field of a loss over the m = 3 probability simplex:
/// a barycentric lattice with `resolution` subdivisions, skipping points
/// within `margin` of the boundary. Each grid point p is lifted to logits
/// z = log p and dp_i = -p_i (grad_i - p . grad) is the first-order motion of
/// p under one infinitesimal update.
std::vector<FieldSample> vector_field(LossKind kind, const LabelVector& y, int resolution,
                                      double margin = 1e-3, const LossParams& params = {});

/// First recorded step index satisfying the predicate, if any.
std::optional<int> first_step(const Trajectory& traj,
                              const std::function<bool(const TrajectoryPoint&)>& pred);

/// CSV columns: t, z1..zm, p1..pm, loss.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
/// CSV columns: p1, p2, p3, dp1, dp2, dp3, grad_norm.
void write_field_csv(const std::vector<FieldSample>& field, std::ostream& out);
std::string trajectory_to_json(const Trajectory& traj);
std::string field_to_json(const std::vector<FieldSample>& field);

}  // namespace pllab
