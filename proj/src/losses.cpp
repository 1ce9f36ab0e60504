#include "pllab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pllab {

namespace {

constexpr double kTinyProb = 1e-300;   // clamp floor for probabilities inside logs
constexpr double kMinResidual = 1e-12; // clamp floor for 1 - p_hat in tolerant mode

void check_pair(std::span<const double> p, const LabelVector& y) {
    if (static_cast<int>(p.size()) != y.size())
        throw std::invalid_argument("loss: p and y length mismatch");
}

double safe_log(double x, bool tolerant) {
    if (x <= 0.0) {
        if (!tolerant) throw std::domain_error("loss: log of non-positive probability");
        x = kTinyProb;
    }
    return std::log(x);
}

}  // namespace

LabelVector::LabelVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.size() < 2) throw std::invalid_argument("LabelVector: need m >= 2");
    for (auto b : bits_) {
        if (b > 1) throw std::invalid_argument("LabelVector: bits must be 0/1");
        k_ += b;
    }
    if (k_ == 0) throw std::invalid_argument("LabelVector: need at least one allowed output");
}

LabelVector LabelVector::from_indices(int m, std::span<const int> allowed) {
    if (m < 2) throw std::invalid_argument("LabelVector: need m >= 2");
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m), 0);
    for (int i : allowed) {
        if (i < 0 || i >= m) throw std::invalid_argument("LabelVector: index out of range");
        bits[static_cast<std::size_t>(i)] = 1;
    }
    return LabelVector(std::move(bits));
}

std::vector<int> LabelVector::indices() const {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(k_));
    for (int i = 0; i < size(); ++i)
        if (allowed(i)) idx.push_back(i);
    return idx;
}

LossKind loss_kind_from_name(std::string_view name) {
    for (LossKind k : all_loss_kinds())
        if (name == loss_kind_name(k)) return k;
    throw std::invalid_argument("unknown loss kind: " + std::string(name));
}

std::string_view loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::Nll: return "nll";
        case LossKind::Libra: return "libra";
        case LossKind::Sag: return "sag";
        case LossKind::Uniform: return "uniform";
        case LossKind::Merit: return "merit";
        case LossKind::Lws: return "lws";
        case LossKind::Rc: return "rc";
    }
    return "?";
}

const std::vector<LossKind>& all_loss_kinds() {
    static const std::vector<LossKind> kinds = {LossKind::Nll,   LossKind::Libra, LossKind::Sag,
                                                LossKind::Uniform, LossKind::Merit, LossKind::Lws,
                                                LossKind::Rc};
    return kinds;
}

bool loss_uses_raw_logits(LossKind kind) { return kind == LossKind::Lws; }

double allowed_mass(std::span<const double> p, const LabelVector& y) {
    check_pair(p, y);
    double s = 0.0;
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i)) s += p[static_cast<std::size_t>(i)];
    return s;
}

LossResult nll(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    check_pair(p, y);
    double p_hat = allowed_mass(p, y);
    if (p_hat <= 0.0) {
        if (!params.tolerant) throw std::domain_error("nll: p_hat is zero");
        p_hat = kTinyProb;
    }
    LossResult r;
    r.value = -std::log(p_hat);
    r.grad_logits.resize(p.size());
    for (int j = 0; j < y.size(); ++j) {
        const double pj = p[static_cast<std::size_t>(j)];
        r.grad_logits[static_cast<std::size_t>(j)] = pj / p_hat * (p_hat - (y.allowed(j) ? 1.0 : 0.0));
    }
    return r;
}

LossResult libra(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    check_pair(p, y);
    const int k = y.count();
    const double p_hat = allowed_mass(p, y);
    double residual = 1.0 - p_hat;
    if (residual <= 0.0 && !params.tolerant)
        throw std::domain_error("libra: p_hat reached 1 (fit complete)");
    residual = std::max(residual, kMinResidual);

    LossResult r;
    double allowed_term = 0.0;
    r.grad_logits.resize(p.size());
    for (int j = 0; j < y.size(); ++j) {
        const double pj = p[static_cast<std::size_t>(j)];
        if (y.allowed(j)) {
            allowed_term += safe_log(pj, params.tolerant);
            r.grad_logits[static_cast<std::size_t>(j)] = -1.0 / k;
        } else {
            r.grad_logits[static_cast<std::size_t>(j)] = pj / residual;
        }
    }
    r.value = std::log(residual) - allowed_term / k;

    if (params.libra_fit_weight) {
        // w_Lib = 1 - p_hat, treated as a constant factor on both value and
        // gradient; at the fit boundary it vanishes and so does the update.
        const double w = std::max(1.0 - p_hat, 0.0);
        r.value *= w;
        for (double& g : r.grad_logits) g *= w;
    }
    return r;
}

LossResult sag(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    return sag(p, y, {}, params);
}

LossResult sag(std::span<const double> p, const LabelVector& y, std::span<const double> z,
               const LossParams& params) {
    check_pair(p, y);
    const int m = y.size();
    const int k = y.count();
    if (k == m) throw std::invalid_argument("sag: k = m leaves no disallowed output");

    LossResult r;
    r.grad_logits.resize(p.size());
    double allowed_term = 0.0, disallowed_term = 0.0;
    for (int j = 0; j < m; ++j) {
        const double lp = safe_log(p[static_cast<std::size_t>(j)], params.tolerant);
        if (y.allowed(j)) {
            allowed_term += lp;
            r.grad_logits[static_cast<std::size_t>(j)] = -1.0 / k;
        } else {
            disallowed_term += lp;
            r.grad_logits[static_cast<std::size_t>(j)] = 1.0 / (m - k);
        }
    }
    r.value = disallowed_term / (m - k) - allowed_term / k;

    if (params.logit_l2_gamma > 0.0 && !z.empty()) {
        if (z.size() != p.size()) throw std::invalid_argument("sag: z and p length mismatch");
        const double g = params.logit_l2_gamma;
        for (int j = 0; j < m; ++j) {
            const double zj = z[static_cast<std::size_t>(j)];
            r.value += g * zj * zj;
            r.grad_logits[static_cast<std::size_t>(j)] += 2.0 * g * zj;
        }
    }
    return r;
}

LossResult uniform_loss(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    check_pair(p, y);
    const int k = y.count();
    LossResult r;
    r.grad_logits.resize(p.size());
    for (int j = 0; j < y.size(); ++j) {
        const double pj = p[static_cast<std::size_t>(j)];
        if (y.allowed(j)) {
            r.value -= safe_log(pj, params.tolerant);
            r.grad_logits[static_cast<std::size_t>(j)] = k * pj - 1.0;
        } else {
            r.grad_logits[static_cast<std::size_t>(j)] = k * pj;
        }
    }
    return r;
}

Vec merit_weights(std::span<const double> p, const LabelVector& y, double beta,
                  const LossParams& params) {
    check_pair(p, y);
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("merit: beta must be in [0, 1]");
    double p_hat = allowed_mass(p, y);
    if (p_hat <= 0.0) {
        if (!params.tolerant) throw std::domain_error("merit: p_hat is zero");
        p_hat = kTinyProb;
    }
    Vec w(p.size(), 0.0);
    double norm = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        if (!y.allowed(i)) continue;
        const double wi = std::pow(p[static_cast<std::size_t>(i)] / p_hat, beta);
        w[static_cast<std::size_t>(i)] = wi;
        norm += wi;
    }
    for (double& wi : w) wi /= norm;
    return w;
}

double merit_value_frozen(std::span<const double> p, const LabelVector& y, std::span<const double> w,
                          const LossParams& params) {
    double v = 0.0;
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i)) v -= w[static_cast<std::size_t>(i)] * safe_log(p[static_cast<std::size_t>(i)], params.tolerant);
    return v;
}

LossResult merit(std::span<const double> p, const LabelVector& y, double beta,
                 const LossParams& params) {
    const Vec w = merit_weights(p, y, beta, params);
    LossResult r;
    r.value = merit_value_frozen(p, y, w, params);
    r.grad_logits.resize(p.size());
    // sum_i w_i = 1, so grad_j = p_j sum_i w_i - w_j = p_j - w_j
    for (std::size_t j = 0; j < p.size(); ++j) r.grad_logits[j] = p[j] - w[j];
    return r;
}

Vec lws_weights(std::span<const double> z, const LabelVector& y) {
    if (static_cast<int>(z.size()) != y.size())
        throw std::invalid_argument("lws: z and y length mismatch");
    if (y.count() == y.size()) throw std::invalid_argument("lws: k = m leaves no disallowed output");
    // Softmax-normalize within the allowed and disallowed classes separately,
    // with a max shift per class for stability.
    double max_a = -1e308, max_d = -1e308;
    for (int i = 0; i < y.size(); ++i) {
        const double zi = z[static_cast<std::size_t>(i)];
        if (y.allowed(i)) max_a = std::max(max_a, zi); else max_d = std::max(max_d, zi);
    }
    double den_a = 0.0, den_d = 0.0;
    Vec w(z.size());
    for (int i = 0; i < y.size(); ++i) {
        const double zi = z[static_cast<std::size_t>(i)];
        if (y.allowed(i)) {
            w[static_cast<std::size_t>(i)] = std::exp(zi - max_a);
            den_a += w[static_cast<std::size_t>(i)];
        } else {
            w[static_cast<std::size_t>(i)] = std::exp(zi - max_d);
            den_d += w[static_cast<std::size_t>(i)];
        }
    }
    for (int i = 0; i < y.size(); ++i)
        w[static_cast<std::size_t>(i)] /= y.allowed(i) ? den_a : den_d;
    return w;
}

namespace {
// sigma as printed: decreasing in t. The conventional variant negates the
// argument.
double lws_sigma(double t, const LossParams& params) {
    if (!params.lws_decreasing_sigma) t = -t;
    // 1 / (1 + e^t), overflow-safe on both tails
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}
}  // namespace

double lws_value_frozen(std::span<const double> z, const LabelVector& y, std::span<const double> w,
                        double beta, const LossParams& params) {
    double v = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double zi = z[static_cast<std::size_t>(i)];
        const double wi = w[static_cast<std::size_t>(i)];
        if (y.allowed(i)) v += wi * lws_sigma(zi, params);
        else v += beta * wi * lws_sigma(-zi, params);
    }
    return v;
}

LossResult lws(std::span<const double> z, const LabelVector& y, double beta,
               const LossParams& params) {
    if (beta <= 0.0) throw std::invalid_argument("lws: beta must be > 0");
    if (y.count() == y.size()) throw std::invalid_argument("lws: k = m leaves no disallowed output");
    const Vec w = lws_weights(z, y);
    LossResult r;
    r.value = lws_value_frozen(z, y, w, beta, params);
    r.grad_logits.resize(z.size());
    const double sign = params.lws_decreasing_sigma ? 1.0 : -1.0;
    for (int j = 0; j < y.size(); ++j) {
        const double zj = z[static_cast<std::size_t>(j)];
        const double ss = lws_sigma(zj, params) * lws_sigma(-zj, params);  // symmetric in zj
        const double wj = w[static_cast<std::size_t>(j)];
        // d/dt sigma(t) = -sigma(t) sigma(-t) for the printed form
        r.grad_logits[static_cast<std::size_t>(j)] =
            sign * (y.allowed(j) ? -wj * ss : beta * wj * ss);
    }
    return r;
}

Vec rc_weights(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    check_pair(p, y);
    double p_hat = allowed_mass(p, y);
    if (p_hat <= 0.0) {
        if (!params.tolerant) throw std::domain_error("rc: p_hat is zero");
        p_hat = kTinyProb;
    }
    Vec w(p.size(), 0.0);
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i)) w[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] / p_hat;
    return w;
}

double rc_value_frozen(std::span<const double> p, const LabelVector& y, std::span<const double> w,
                       const LossParams& params) {
    double v = 0.0;
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i))
            v -= 0.5 * w[static_cast<std::size_t>(i)] * safe_log(p[static_cast<std::size_t>(i)], params.tolerant);
    return v;
}

LossResult rc(std::span<const double> p, const LabelVector& y, const LossParams& params) {
    const Vec w = rc_weights(p, y, params);
    LossResult r;
    r.value = rc_value_frozen(p, y, w, params);
    r.grad_logits.resize(p.size());
    double wsum = 0.0;  // sum_i y_i w_i (equals 1 up to rounding)
    for (int i = 0; i < y.size(); ++i)
        if (y.allowed(i)) wsum += w[static_cast<std::size_t>(i)];
    for (int j = 0; j < y.size(); ++j) {
        const double wj = y.allowed(j) ? w[static_cast<std::size_t>(j)] : 0.0;
        r.grad_logits[static_cast<std::size_t>(j)] =
            0.5 * (p[static_cast<std::size_t>(j)] * wsum - wj);
    }
    return r;
}

LossResult evaluate(LossKind kind, std::span<const double> z, std::span<const double> p,
                    const LabelVector& y, const LossParams& params) {
    switch (kind) {
        case LossKind::Nll: return nll(p, y, params);
        case LossKind::Libra: return libra(p, y, params);
        case LossKind::Sag: return sag(p, y, z, params);
        case LossKind::Uniform: return uniform_loss(p, y, params);
        case LossKind::Merit: return merit(p, y, params.beta, params);
        case LossKind::Lws: return lws(z, y, params.beta, params);
        case LossKind::Rc: return rc(p, y, params);
    }
    throw std::invalid_argument("evaluate: bad loss kind");
}

LossResult negative_term(LossKind kind, std::span<const double> z, std::span<const double> p,
                         const std::vector<LabelVector>& neg_label_sets, Rng& rng,
                         const LossParams& params) {
    LossResult r;
    r.grad_logits.assign(p.size(), 0.0);
    if (neg_label_sets.empty()) return r;
    if (params.neg_sample_count < 1)
        throw std::invalid_argument("negative_term: neg_sample_count must be >= 1");

    const int total = static_cast<int>(neg_label_sets.size());
    const int take = std::min(params.neg_sample_count, total);
    std::vector<int> picks;
    if (take == total) {
        picks.resize(static_cast<std::size_t>(total));
        for (int i = 0; i < total; ++i) picks[static_cast<std::size_t>(i)] = i;
    } else {
        picks = rng.sample_without_replacement(total, take);
    }

    for (int idx : picks) {
        const LossResult base = evaluate(kind, z, p, neg_label_sets[static_cast<std::size_t>(idx)], params);
        r.value -= base.value;
        for (std::size_t j = 0; j < r.grad_logits.size(); ++j)
            r.grad_logits[j] -= base.grad_logits[j];
    }
    return r;
}

LossResult combined_with_negatives(LossKind kind, std::span<const double> z,
                                   std::span<const double> p, const LabelVector& y,
                                   const std::vector<LabelVector>& neg_label_sets, Rng& rng,
                                   const LossParams& params) {
    LossResult r = evaluate(kind, z, p, y, params);
    if (params.neg_gamma == 0.0 || neg_label_sets.empty()) return r;
    const LossResult neg = negative_term(kind, z, p, neg_label_sets, rng, params);
    r.value += params.neg_gamma * neg.value;
    for (std::size_t j = 0; j < r.grad_logits.size(); ++j)
        r.grad_logits[j] += params.neg_gamma * neg.grad_logits[j];
    return r;
}

}  // namespace pllab
