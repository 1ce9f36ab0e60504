#include "pllab/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pllab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Vec model_probs(const Model& model, const Vec& x) { return softmax(model.forward(x)); }

}  // namespace

int argmax_index(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double accuracy(const Model& model, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("accuracy: empty dataset");
    if (!data.has_truth()) throw std::invalid_argument("accuracy: dataset has no truth labels");
    int hits = 0;
    for (const auto& s : data.samples)
        if (argmax_index(model.forward(s.x)) == *s.y_true) ++hits;
    return static_cast<double>(hits) / data.n();
}

double p_pos(const Model& model, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("p_pos: empty dataset");
    double sum = 0.0;
    for (const auto& s : data.samples) sum += allowed_mass(model_probs(model, s.x), s.y);
    return sum / data.n();
}

double p_neg(const Model& model, const Dataset& data, const std::vector<LabelVector>& neg_sets) {
    if (data.samples.empty()) throw std::invalid_argument("p_neg: empty dataset");
    std::vector<std::uint8_t> forbidden(static_cast<std::size_t>(data.m), 0);
    for (const auto& yn : neg_sets)
        for (int i : yn.indices()) forbidden[static_cast<std::size_t>(i)] = 1;
    double sum = 0.0;
    for (const auto& s : data.samples) {
        const Vec p = model_probs(model, s.x);
        double per_sample = 0.0;
        for (int i = 0; i < data.m; ++i)
            if (forbidden[static_cast<std::size_t>(i)]) per_sample += p[static_cast<std::size_t>(i)];
        sum += per_sample;
    }
    return sum / data.n();
}

double hit_at_k(const Model& model, const Dataset& data, int k, HitTarget target,
                const std::vector<LabelVector>* neg_sets) {
    if (data.samples.empty()) throw std::invalid_argument("hit_at_k: empty dataset");
    if (k <= 0 || k > data.m) throw std::invalid_argument("hit_at_k: need 1 <= k <= m");
    std::vector<std::uint8_t> forbidden;
    if (target == HitTarget::Forbidden) {
        forbidden.assign(static_cast<std::size_t>(data.m), 0);
        if (neg_sets)
            for (const auto& yn : *neg_sets)
                for (int i : yn.indices()) forbidden[static_cast<std::size_t>(i)] = 1;
    }

    int hits = 0;
    std::vector<int> idx(static_cast<std::size_t>(data.m));
    for (const auto& s : data.samples) {
        const Vec p = model_probs(model, s.x);
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
            const double pa = p[static_cast<std::size_t>(a)], pb = p[static_cast<std::size_t>(b)];
            return pa > pb || (pa == pb && a < b);
        });
        for (int r = 0; r < k; ++r) {
            const int i = idx[static_cast<std::size_t>(r)];
            const bool in_target = target == HitTarget::Allowed
                                       ? s.y.allowed(i)
                                       : forbidden[static_cast<std::size_t>(i)] != 0;
            if (in_target) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / data.n();
}

TrainHistory train(const Dataset& data, Model& model, const TrainConfig& config,
                   const Dataset* eval_data) {
    if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");
    if (data.d != model.input_dim() || data.m != model.output_dim())
        throw std::invalid_argument("train: dataset and model dimensions disagree");
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (config.batch_size < 0) throw std::invalid_argument("train: bad batch size");

    const int n = data.n();
    const int batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    Rng rng(config.seed);

    TrainHistory history;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;

    ParamGrads grads = model.zero_grads();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < n) rng.shuffle(order);
        double epoch_loss = 0.0;

        for (int start = 0; start < n; start += batch) {
            const int stop = std::min(start + batch, n);
            ParamGrads fresh = model.zero_grads();
            std::swap(grads, fresh);
            double batch_loss = 0.0;
            for (int b = start; b < stop; ++b) {
                const int sample_index = order[static_cast<std::size_t>(b)];
                const Sample& s = data.samples[static_cast<std::size_t>(sample_index)];
                ForwardCache cache;
                LossResult r;
                bool finite = true;
                std::string detail;
                try {
                    const Vec z = model.forward(s.x, &cache);
                    const Vec p = softmax(z);
                    r = combined_with_negatives(config.kind, z, p, s.y, data.negative_sets, rng,
                                                config.params);
                    finite = std::isfinite(r.value) && all_finite(r.grad_logits);
                } catch (const std::exception& ex) {
                    finite = false;
                    detail = ex.what();
                }
                if (!finite) {
                    std::ostringstream os;
                    os << "train: non-finite loss at epoch " << epoch << ", sample "
                       << sample_index << " (" << loss_kind_name(config.kind) << ")";
                    if (!detail.empty()) os << ": " << detail;
                    throw std::runtime_error(os.str());
                }
                batch_loss += r.value;
                model.backward(cache, r.grad_logits, grads);
            }
            const int count = stop - start;
            if (config.average_batch) grads.scale(1.0 / count);
            model.sgd_step(grads, config.learning_rate, config.weight_decay);
            epoch_loss += batch_loss;
        }

        if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) {
            EpochStats st;
            st.epoch = epoch;
            st.train_loss = epoch_loss / n;
            try {
                st.train_acc = data.has_truth() ? accuracy(model, data) : kNan;
                st.test_acc =
                    eval_data && eval_data->has_truth() ? accuracy(model, *eval_data) : kNan;
                st.p_pos = p_pos(model, data);
                st.p_neg =
                    data.negative_sets.empty() ? kNan : p_neg(model, data, data.negative_sets);
            } catch (const std::exception& ex) {
                std::ostringstream os;
                os << "train: model state diverged by epoch " << epoch << " ("
                   << loss_kind_name(config.kind) << "): " << ex.what();
                throw std::runtime_error(os.str());
            }
            history.epochs.push_back(st);

            if (config.early_stop) {
                if (st.train_loss < best_loss - config.early_stop->min_delta) {
                    best_loss = st.train_loss;
                    stale = 0;
                } else if (++stale >= config.early_stop->patience) {
                    break;
                }
            }
        }
    }
    return history;
}

SweepReport sweep(const Dataset& data, const ModelFactory& factory, const TrainConfig& config,
                  std::span<const std::uint64_t> seeds, std::optional<int> optimal_output,
                  int threads) {
    if (seeds.empty()) throw std::invalid_argument("sweep: need at least one seed");
    if (data.samples.empty()) throw std::invalid_argument("sweep: empty dataset");
    const Vec& canonical_x = data.samples.front().x;

    SweepReport report;
    report.outcomes.resize(seeds.size());

    const auto run_one = [&](std::size_t i) {
        SeedOutcome& out = report.outcomes[i];
        out.seed = seeds[i];
        try {
            Rng init_rng(seeds[i]);
            std::unique_ptr<Model> model = factory(init_rng);
            TrainConfig cfg = config;
            cfg.seed = seeds[i];
            train(data, *model, cfg);
            out.p_pos = p_pos(*model, data);
            out.train_acc = data.has_truth() ? accuracy(*model, data) : kNan;
            if (optimal_output)
                out.success = argmax_index(model->forward(canonical_x)) == *optimal_output;
        } catch (const std::exception& ex) {
            out.error = ex.what();
        }
    };

    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1))
                    run_one(i);
            });
        for (auto& t : pool) t.join();
    }

    int successes = 0;
    for (const auto& out : report.outcomes) successes += out.success ? 1 : 0;
    report.success_rate = static_cast<double>(successes) / static_cast<double>(seeds.size());
    return report;
}

void write_history_csv(const TrainHistory& history, std::ostream& out) {
    out << "epoch,train_loss,train_acc,test_acc,p_pos,p_neg\n";
    out.precision(17);
    for (const auto& e : history.epochs)
        out << e.epoch << "," << e.train_loss << "," << e.train_acc << "," << e.test_acc << ","
            << e.p_pos << "," << e.p_neg << "\n";
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
    out << "seed,success,p_pos,train_acc,error\n";
    out.precision(17);
    for (const auto& o : report.outcomes)
        out << o.seed << "," << (o.success ? 1 : 0) << "," << o.p_pos << "," << o.train_acc << ","
            << o.error << "\n";
}

}  // namespace pllab
