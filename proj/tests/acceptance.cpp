// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Statistical criteria run at fixed seeds so the verdicts are
// reproducible.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pllab/datagen.hpp"
#include "pllab/dynamics.hpp"
#include "pllab/losses.hpp"
#include "pllab/models.hpp"
#include "pllab/propcheck.hpp"
#include "pllab/trainer.hpp"

#include "../tests/testutil.hpp"

using namespace pllab;
using testutil::fd_grad_z;
using testutil::frozen_value_fn;
using testutil::max_rel_err;
using testutil::random_labels;
using testutil::random_logits;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << (detail.str().empty() ? "" : "; ") << what;
        }
    }
    template <typename T>
    void note(const std::string& label, T value) {
        detail << (detail.str().empty() ? "" : "; ") << label << "=" << value;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradient_oracle(Check& c) {
    Rng rng(1001);
    LossParams params;
    params.beta = 0.5;
    double worst = 0.0;
    for (int m : {3, 10, 100}) {
        for (LossKind kind : all_loss_kinds()) {
            for (int inst = 0; inst < 100; ++inst) {
                const bool needs_disallowed = loss_uses_raw_logits(kind) ||
                                              kind == LossKind::Sag || kind == LossKind::Libra;
                const int kmax = needs_disallowed ? m - 1 : m;
                const int k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(kmax)));
                const LabelVector y = random_labels(m, k, rng);
                const Vec z = random_logits(m, rng);
                const Vec p = softmax(z);
                const LossResult analytic = evaluate(kind, z, p, y, params);
                const Vec fd = fd_grad_z(frozen_value_fn(kind, z, y, params), z, 1e-6);
                worst = std::max(worst, max_rel_err(analytic.grad_logits, fd));
            }
        }
    }
    c.note("max_rel_err", fmt(worst));
    c.expect(worst < 1e-5, "gradient mismatch above 1e-5");
}

// ---------------------------------------------------------------- criterion 2

void criterion_closed_forms(Check& c) {
    Rng rng(1002);
    double libra_dev = 0.0, sag_dev = 0.0, sag_p_dev = 0.0, sum_dev = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 3 + static_cast<int>(rng.next_below(30));
        const int k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m - 1)));
        const LabelVector y = random_labels(m, k, rng);
        const Vec z = random_logits(m, rng);
        const Vec p = softmax(z);
        const Vec q = softmax(random_logits(m, rng));

        const LossResult rl = libra(p, y);
        for (int i : y.indices())
            libra_dev = std::max(libra_dev,
                                 std::abs(rl.grad_logits[static_cast<std::size_t>(i)] + 1.0 / k));

        const LossResult s1 = sag(p, y);
        const LossResult s2 = sag(q, y);
        for (int j = 0; j < m; ++j) {
            const double expected = y.allowed(j) ? -1.0 / k : 1.0 / (m - k);
            sag_dev = std::max(sag_dev,
                               std::abs(s1.grad_logits[static_cast<std::size_t>(j)] - expected));
            sag_p_dev = std::max(sag_p_dev,
                                 std::abs(s1.grad_logits[static_cast<std::size_t>(j)] -
                                          s2.grad_logits[static_cast<std::size_t>(j)]));
        }

        for (LossKind kind : {LossKind::Nll, LossKind::Libra, LossKind::Sag, LossKind::Uniform,
                              LossKind::Merit, LossKind::Rc})
            sum_dev = std::max(sum_dev, std::abs(gradient_sum(kind, z, p, y)));
    }
    c.note("libra_dev", fmt(libra_dev));
    c.note("sag_dev", fmt(sag_dev));
    c.note("grad_sum_dev", fmt(sum_dev));
    c.expect(libra_dev < 1e-14, "libra allowed gradient off -1/k");
    c.expect(sag_dev < 1e-14, "sag gradient off closed form");
    c.expect(sag_p_dev < 1e-14, "sag gradient depends on p");
    c.expect(sum_dev < 1e-12, "gradient sum nonzero");
}

// ---------------------------------------------------------------- criterion 3

void criterion_ratio_preservation(Check& c) {
    Rng rng(1003);
    LossParams tolerant;
    tolerant.tolerant = true;

    double drift_one = 0.0, drift_long = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 3 + static_cast<int>(rng.next_below(10));
        const int k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m - 1)));
        const LabelVector y = random_labels(m, k, rng);
        const Vec z0 = random_logits(m, rng);
        for (double lr : {0.01, 0.1, 1.0}) {
            drift_one = std::max(drift_one, ratio_drift(LossKind::Libra, z0, y, lr, 1, tolerant).allowed);
            const RatioDrift s = ratio_drift(LossKind::Sag, z0, y, lr, 1, tolerant);
            drift_one = std::max({drift_one, s.allowed, s.disallowed});
        }
        for (double lr : {0.01, 0.1}) {
            drift_long =
                std::max(drift_long, ratio_drift(LossKind::Libra, z0, y, lr, 1000, tolerant).allowed);
            const RatioDrift s = ratio_drift(LossKind::Sag, z0, y, lr, 1000, tolerant);
            drift_long = std::max({drift_long, s.allowed, s.disallowed});
        }
    }
    c.note("one_step_drift", fmt(drift_one));
    c.note("1000_step_drift", fmt(drift_long));
    c.expect(drift_one < 1e-9, "one-step ratio drift above 1e-9");
    c.expect(drift_long < 1e-9, "1000-step ratio drift above 1e-9");

    SamplePlan plan;
    plan.ms = {3, 10};
    plan.points_per_m = 200;
    plan.seed = 1003;
    const ResidualReport libra_rep = check_property(LossKind::Libra, {}, Property::Prp, plan, 1e-6);
    const ResidualReport sag_rep = check_property(LossKind::Sag, {}, Property::BiPrp, plan, 1e-6);
    const ResidualReport nll_rep = check_property(LossKind::Nll, {}, Property::Prp, plan, 1e-6);
    c.note("libra_residual", fmt(libra_rep.max_allowed));
    c.note("sag_residual", fmt(std::max(sag_rep.max_allowed, sag_rep.max_disallowed)));
    c.note("nll_residual", fmt(nll_rep.max_allowed));
    c.expect(libra_rep.pass, "libra prp residual above 1e-6");
    c.expect(sag_rep.pass, "sag biprp residual above 1e-6");
    c.expect(nll_rep.max_allowed > 1e-3, "nll prp residual unexpectedly small");
}

// ---------------------------------------------------------------- criterion 4

void criterion_winner_take_all(Check& c) {
    const int seeds = 100;
    std::vector<int> wins(seeds, 0);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int s = next.fetch_add(1); s < seeds; s = next.fetch_add(1)) {
            Rng rng(2000 + static_cast<std::uint64_t>(s));
            const Vec z0 = random_logits(100, rng, 1.0);
            const LabelVector y = random_labels(100, 3, rng);
            const Vec p0 = softmax(z0);
            int leader = -1;
            double best = -1.0;
            for (int i : y.indices())
                if (p0[static_cast<std::size_t>(i)] > best) {
                    best = p0[static_cast<std::size_t>(i)];
                    leader = i;
                }
            DynamicsConfig cfg;
            cfg.kind = LossKind::Nll;
            cfg.learning_rate = 0.5;
            cfg.max_steps = 10000;
            cfg.record_every = 10000;
            const Trajectory traj = simulate(z0, {y}, cfg);
            if (traj.back().p[static_cast<std::size_t>(leader)] > 0.999) wins[static_cast<std::size_t>(s)] = 1;
        }
    };
    std::thread t1(work), t2(work);
    t1.join();
    t2.join();
    int total = 0;
    for (int w : wins) total += w;
    c.note("wins", total);
    c.expect(total >= 99, "fewer than 99/100 seeds reached the initial argmax");

    // exact two-way tie: J = both allowed outputs, equal logits bit for bit
    Rng rng(2999);
    Vec z0 = random_logits(100, rng, 1.0);
    double zmax = -1e9;
    for (double zi : z0) zmax = std::max(zmax, zi);
    z0[4] = zmax + 0.5;
    z0[7] = zmax + 0.5;
    const LabelVector y = LabelVector::from_indices(100, std::vector<int>{4, 7});
    DynamicsConfig cfg;
    cfg.kind = LossKind::Nll;
    cfg.learning_rate = 0.5;
    cfg.max_steps = 10000;
    cfg.record_every = 10000;
    const Trajectory traj = simulate(z0, {y}, cfg);
    const LimitReport report = detect_winner_take_all(traj, y, 1e-3);
    c.note("tie_p", fmt(traj.back().p[4]));
    c.expect(report.argmax_set == std::vector<int>({4, 7}), "tie argmax set not detected");
    c.expect(report.converged, "tie did not reach (0.5, 0.5) within 1e-3");
}

// ---------------------------------------------------------------- criterion 5

void criterion_nll_ratio_law(Check& c) {
    Rng rng(1005);
    const int m = 6;
    const LabelVector y = random_labels(m, 3, rng);
    const Vec z0 = random_logits(m, rng);
    const double lr = 0.7;
    DynamicsConfig cfg;
    cfg.kind = LossKind::Nll;
    cfg.learning_rate = lr;
    cfg.max_steps = 10000;
    const Trajectory traj = simulate(z0, {y}, cfg);

    const auto allowed = y.indices();
    double law_dev = 0.0, sum_dev = 0.0;
    double z_sum0 = 0.0;
    for (double zi : z0) z_sum0 += zi;
    for (std::size_t t = 0; t + 1 < traj.points.size(); ++t) {
        const Vec& p = traj.points[t].p;
        const Vec& pn = traj.points[t + 1].p;
        const double p_hat = allowed_mass(p, y);
        for (std::size_t a = 0; a < allowed.size(); ++a) {
            for (std::size_t b = a + 1; b < allowed.size(); ++b) {
                const std::size_t i = static_cast<std::size_t>(allowed[a]);
                const std::size_t j = static_cast<std::size_t>(allowed[b]);
                const double predicted =
                    (p[i] / p[j]) * std::exp(lr * (p[i] - p[j]) * (1.0 - p_hat) / p_hat);
                law_dev = std::max(law_dev, std::abs(pn[i] / pn[j] - predicted) /
                                                std::max(1.0, std::abs(predicted)));
            }
        }
        double z_sum = 0.0;
        for (double zi : traj.points[t + 1].z) z_sum += zi;
        sum_dev = std::max(sum_dev, std::abs(z_sum - z_sum0));
    }
    c.note("ratio_law_dev", fmt(law_dev));
    c.note("logit_sum_dev", fmt(sum_dev));
    c.expect(law_dev < 1e-12, "per-step ratio law violated at 1e-12");
    c.expect(sum_dev < 1e-10, "logit sum drifted above 1e-10");
}

// ---------------------------------------------------------------- criterion 6

// Fig-6 style protocol: full-batch SGD at lr 0.5, stopped once the train loss
// plateaus (< 3e-3 improvement for 10 epochs, 300-epoch cap), seeds 0..199.
struct SweepSetup {
    double lr = 0.5;
    int epochs = 300;
    int seeds = 200;
};

double small_consistent_success(LossKind kind, const SweepSetup& setup, double beta = 0.5) {
    const Dataset data = gen_small_consistent();
    TrainConfig config;
    config.kind = kind;
    config.params.beta = beta;
    config.learning_rate = setup.lr;
    config.epochs = setup.epochs;
    config.batch_size = 0;  // full batch
    config.eval_every = 1;
    config.early_stop = EarlyStop{3e-3, 10};
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(setup.seeds));
    for (int i = 0; i < setup.seeds; ++i) seeds[static_cast<std::size_t>(i)] = i;
    const auto factory = [](Rng& rng) -> std::unique_ptr<Model> {
        return std::make_unique<Mlp>(Mlp::init(10, {50}, 100, rng));
    };
    return sweep(data, factory, config, seeds, 0).success_rate;
}

void criterion_small_consistent_sweep(Check& c) {
    const SweepSetup setup;
    const double libra_rate = small_consistent_success(LossKind::Libra, setup);
    const double sag_rate = small_consistent_success(LossKind::Sag, setup);
    const double uniform_rate = small_consistent_success(LossKind::Uniform, setup);
    const double nll_rate = small_consistent_success(LossKind::Nll, setup);
    const double rc_rate = small_consistent_success(LossKind::Rc, setup);
    c.note("libra", libra_rate);
    c.note("sag", sag_rate);
    c.note("uniform", uniform_rate);
    c.note("nll", nll_rate);
    c.note("rc", rc_rate);
    c.expect(libra_rate >= 0.90, "libra success below 0.90");
    c.expect(sag_rate >= 0.90, "sag success below 0.90");
    c.expect(uniform_rate >= 0.60 && uniform_rate <= 0.95, "uniform success outside [0.60, 0.95]");
    c.expect(nll_rate <= 0.40, "nll success above 0.40");
    c.expect(rc_rate <= 0.60, "rc success above 0.60");
}

// ---------------------------------------------------------------- criterion 7

// Two samples (x, {A, B}) and (x, {A, C}) at m = 100 after an adversarial
// warm start toward the B-C line; success = argmax lands on A.
bool example5_trial(LossKind kind, std::uint64_t seed, double lr) {
    const int d = 10, m = 100;
    const int A = 0, B = 1, C = 2;
    const Vec x(d, 1.0);
    Rng rng(seed);
    Mlp model = Mlp::init(d, {50}, m, rng);

    TrainConfig warm;
    warm.kind = kind;
    warm.learning_rate = lr;
    warm.epochs = 20;
    warm.eval_every = 20;
    warm.seed = seed;
    Dataset warm_data;
    warm_data.d = d;
    warm_data.m = m;
    warm_data.samples.push_back({x, LabelVector::from_indices(m, std::vector<int>{B, C}),
                                 std::nullopt});
    train(warm_data, model, warm);

    Dataset main_data;
    main_data.d = d;
    main_data.m = m;
    main_data.samples.push_back({x, LabelVector::from_indices(m, std::vector<int>{A, B}),
                                 std::nullopt});
    main_data.samples.push_back({x, LabelVector::from_indices(m, std::vector<int>{A, C}),
                                 std::nullopt});
    TrainConfig config = warm;
    config.epochs = 200;
    config.eval_every = 200;
    train(main_data, model, config);

    return argmax_index(model.forward(x)) == A;
}

void criterion_example5(Check& c) {
    const double lr = 0.25;
    int libra_hits = 0, nll_hits = 0;
    for (int trial = 0; trial < 10; ++trial) {
        if (example5_trial(LossKind::Libra, 4000 + static_cast<std::uint64_t>(trial), lr))
            ++libra_hits;
        if (example5_trial(LossKind::Nll, 4000 + static_cast<std::uint64_t>(trial), lr)) ++nll_hits;
    }
    c.note("libra_hits", libra_hits);
    c.note("nll_hits", nll_hits);
    c.expect(libra_hits >= 9, "libra selected A fewer than 9/10 trials");
    c.expect(nll_hits <= 2, "nll selected A more than 2/10 trials");
}

// ---------------------------------------------------------------- criterion 8

void criterion_noise_matrices(Check& c) {
    const double expected[5] = {0.5, 0.6, 1.8, 4.0, 7.1};
    double row_dev = 0.0;
    for (int case_id = 1; case_id <= 5; ++case_id) {
        const NoiseMatrix noise = builtin_case_matrix(case_id);
        for (int i = 0; i < 10; ++i)
            row_dev = std::max(row_dev, std::abs(noise.expected_distractors(i) -
                                                 expected[case_id - 1]));
    }
    c.note("row_sum_dev", fmt(row_dev));
    c.expect(row_dev < 1e-12, "row sums off the stated expectations");

    Rng gen_rng(1008);
    const Dataset truth = gen_cluster_truth(100000, 4, 10, 1.0, gen_rng);
    double mc_dev = 0.0;
    for (int case_id = 1; case_id <= 5; ++case_id) {
        Rng rng(1100 + static_cast<std::uint64_t>(case_id));
        const Dataset noised = apply_noise(truth, builtin_case_matrix(case_id), rng);
        double total = 0.0;
        for (const auto& s : noised.samples) total += s.y.count() - 1;
        mc_dev = std::max(mc_dev, std::abs(total / noised.n() - expected[case_id - 1]));
    }
    c.note("mc_dev", fmt(mc_dev));
    c.expect(mc_dev < 0.02, "Monte-Carlo distractor count off by more than 0.02");
}

// ---------------------------------------------------------------- criterion 9

double large_consistent_test_acc(LossKind kind, double r_docc, std::uint64_t seed) {
    Rng gen_rng(5000 + seed);
    const Dataset data = gen_large_consistent(10000, 50, 20, {0.5, r_docc}, 1.0, gen_rng);
    Rng split_rng(6000 + seed);
    const auto parts = split(data, {0.7, 0.15, 0.15}, split_rng);

    TrainConfig config;
    config.kind = kind;
    config.learning_rate = 0.3;
    config.epochs = 200;
    config.batch_size = 256;
    config.seed = 7000 + seed;
    config.eval_every = config.epochs;
    Rng model_rng(8000 + seed);
    Mlp model = Mlp::init(50, {64}, 20, model_rng);
    train(parts[0], model, config);
    return accuracy(model, parts[2]);
}

void criterion_large_consistent_trend(Check& c) {
    const std::vector<double> rates = {0.1, 0.5, 0.9};
    double libra_acc[3] = {0, 0, 0}, nll_acc[3] = {0, 0, 0};
    struct Job {
        LossKind kind;
        std::size_t rate_index;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < rates.size(); ++i)
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            jobs.push_back({LossKind::Libra, i, seed});
            jobs.push_back({LossKind::Nll, i, seed});
        }
    std::vector<double> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1))
            results[j] = large_consistent_test_acc(jobs[j].kind, rates[jobs[j].rate_index],
                                                   jobs[j].seed);
    };
    std::thread t1(work), t2(work);
    t1.join();
    t2.join();
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        auto& acc = jobs[j].kind == LossKind::Libra ? libra_acc : nll_acc;
        acc[jobs[j].rate_index] += results[j] / 3.0;
    }
    c.note("libra(0.1/0.5/0.9)",
           fmt(libra_acc[0]) + "/" + fmt(libra_acc[1]) + "/" + fmt(libra_acc[2]));
    c.note("nll(0.1/0.5/0.9)", fmt(nll_acc[0]) + "/" + fmt(nll_acc[1]) + "/" + fmt(nll_acc[2]));
    const double libra_drop = libra_acc[0] - libra_acc[2];
    const double nll_drop = nll_acc[0] - nll_acc[2];
    c.expect(libra_drop < nll_drop, "libra degraded at least as much as nll");
    c.expect(libra_acc[2] - nll_acc[2] >= 0.10, "libra lead at r_docc=0.9 below 0.10");
}

// --------------------------------------------------------------- criterion 10

void criterion_metric_units(Check& c) {
    Rng rng(1010);
    bool exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 4 + static_cast<int>(rng.next_below(7));  // m <= 10
        const int d = 3;
        Dataset data;
        data.d = d;
        data.m = m;
        for (int i = 0; i < 25; ++i) {
            Vec x(static_cast<std::size_t>(d));
            for (double& xi : x) xi = rng.uniform(-2.0, 2.0);
            const int k = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m - 1)));
            data.samples.push_back({std::move(x), random_labels(m, k, rng), std::nullopt});
        }
        const std::vector<LabelVector> negs = {random_labels(m, 2, rng)};
        Rng mrng(1200 + static_cast<std::uint64_t>(trial));
        const SoftmaxRegression model = SoftmaxRegression::init(d, m, mrng);

        // brute force with the same index-order summation
        double bp = 0.0, bn = 0.0;
        std::vector<bool> forbidden(static_cast<std::size_t>(m), false);
        for (const auto& yn : negs)
            for (int i : yn.indices()) forbidden[static_cast<std::size_t>(i)] = true;
        const int k_probe = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m)));
        int hits = 0;
        for (const auto& s : data.samples) {
            const Vec p = softmax(model.forward(s.x));
            double sp = 0.0, sn = 0.0;
            for (int i = 0; i < m; ++i) {
                if (s.y.allowed(i)) sp += p[static_cast<std::size_t>(i)];
                if (forbidden[static_cast<std::size_t>(i)]) sn += p[static_cast<std::size_t>(i)];
            }
            bp += sp;
            bn += sn;
            std::vector<int> order(static_cast<std::size_t>(m));
            for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
            });
            bool hit = false;
            for (int r = 0; r < k_probe; ++r) hit = hit || s.y.allowed(order[static_cast<std::size_t>(r)]);
            hits += hit;
        }
        exact = exact && p_pos(model, data) == bp / data.n();
        exact = exact && p_neg(model, data, negs) == bn / data.n();
        exact = exact &&
                hit_at_k(model, data, k_probe, HitTarget::Allowed) ==
                    static_cast<double>(hits) / data.n();
    }
    c.expect(exact, "metric mismatch against brute force");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<void(Check&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient oracle suite (7 losses, m in {3,10,100})", criterion_gradient_oracle},
        {2, "closed-form gradients and zero-sum", criterion_closed_forms},
        {3, "prp/bi-prp ratio preservation", criterion_ratio_preservation},
        {4, "winner-take-all limits", criterion_winner_take_all},
        {5, "nll per-step ratio law and logit-sum conservation", criterion_nll_ratio_law},
        {6, "small consistent dataset seed sweep", criterion_small_consistent_sweep},
        {7, "adversarial warm-start recovery (two-sample, m=100)", criterion_example5},
        {8, "label-dependent noise matrices", criterion_noise_matrices},
        {9, "large consistent robustness trend", criterion_large_consistent_trend},
        {10, "metric units match brute force", criterion_metric_units},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Check check;
        try {
            criterion.run(check);
        } catch (const std::exception& ex) {
            check.ok = false;
            check.detail << "exception: " << ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %2d (%6.1fs): %s%s%s\n", check.ok ? "PASS" : "FAIL",
                    criterion.id, secs, criterion.name,
                    check.detail.str().empty() ? "" : " -- ", check.detail.str().c_str());
        std::fflush(stdout);
        if (!check.ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
