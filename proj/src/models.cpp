#include "pllab/models.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pllab {

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].data();
        const auto& ow = other.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
        auto& b = biases[l];
        const auto& ob = other.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * ob[i];
    }
}

void ParamGrads::scale(double s) {
    for (auto& w : weights)
        for (double& e : w.data()) e *= s;
    for (auto& b : biases)
        for (double& e : b) e *= s;
}

bool ParamGrads::all_finite() const {
    for (const auto& w : weights)
        if (!w.all_finite()) return false;
    for (const auto& b : biases)
        if (!pllab::all_finite(b)) return false;
    return true;
}

SoftmaxRegression::SoftmaxRegression(DenseMatrix theta) : theta_(std::move(theta)) {
    if (theta_.rows() < 2 || theta_.cols() < 1)
        throw std::invalid_argument("SoftmaxRegression: need m >= 2, d >= 1");
}

SoftmaxRegression SoftmaxRegression::init(int d, int m, Rng& rng) {
    return SoftmaxRegression(glorot_init(d, m, rng));
}

Vec SoftmaxRegression::forward(std::span<const double> x, ForwardCache* cache) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    Vec z = theta_.matvec(x);
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->pre_acts = {z};
        cache->acts = {z};
    }
    return z;
}

ParamGrads SoftmaxRegression::zero_grads() const {
    ParamGrads g;
    g.weights.emplace_back(theta_.rows(), theta_.cols());
    g.biases.emplace_back();
    return g;
}

void SoftmaxRegression::backward(const ForwardCache& cache, std::span<const double> grad_z,
                                 ParamGrads& out) const {
    if (static_cast<int>(cache.input.size()) != input_dim() ||
        static_cast<int>(grad_z.size()) != output_dim() || out.weights.size() != 1)
        throw std::invalid_argument("backward: shape mismatch with cache or grads");
    out.weights[0].add_outer(grad_z, cache.input);
}

void SoftmaxRegression::sgd_step(const ParamGrads& grads, double lr, double weight_decay) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be > 0");
    if (!grads.all_finite()) throw std::runtime_error("sgd_step: non-finite gradient");
    const auto& g = grads.weights[0].data();
    auto& t = theta_.data();
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] -= lr * (g[i] + weight_decay * t[i]);
}

std::unique_ptr<Model> SoftmaxRegression::clone() const {
    return std::make_unique<SoftmaxRegression>(*this);
}

std::string SoftmaxRegression::describe() const {
    std::ostringstream os;
    os << "softmax_regression(d=" << input_dim() << ", m=" << output_dim() << ")";
    return os.str();
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("Mlp: need at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (static_cast<int>(layer.b.size()) != layer.w.rows())
            throw std::invalid_argument("Mlp: bias length must match layer output");
        if (l > 0 && layers_[l - 1].w.rows() != layer.w.cols())
            throw std::invalid_argument("Mlp: consecutive layer dimensions must chain");
    }
    if (layers_.back().act != Activation::Identity)
        throw std::invalid_argument("Mlp: final layer must be identity (logits)");
}

Mlp Mlp::init(int d, const std::vector<int>& hidden, int m, Rng& rng) {
    std::vector<Layer> layers;
    int in = d;
    for (int h : hidden) {
        layers.push_back({glorot_init(in, h, rng), Vec(static_cast<std::size_t>(h), 0.0),
                          Activation::Relu});
        in = h;
    }
    layers.push_back({glorot_init(in, m, rng), Vec(static_cast<std::size_t>(m), 0.0),
                      Activation::Identity});
    return Mlp(std::move(layers));
}

Vec Mlp::forward(std::span<const double> x, ForwardCache* cache) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->pre_acts.clear();
        cache->acts.clear();
    }
    Vec a(x.begin(), x.end());
    for (const auto& layer : layers_) {
        Vec z = layer.w.matvec(a);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.b[i];
        if (cache) cache->pre_acts.push_back(z);
        if (layer.act == Activation::Relu)
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        if (cache) cache->acts.push_back(z);
        a = std::move(z);
    }
    return a;
}

ParamGrads Mlp::zero_grads() const {
    ParamGrads g;
    for (const auto& layer : layers_) {
        g.weights.emplace_back(layer.w.rows(), layer.w.cols());
        g.biases.emplace_back(layer.b.size(), 0.0);
    }
    return g;
}

void Mlp::backward(const ForwardCache& cache, std::span<const double> grad_z,
                   ParamGrads& out) const {
    const std::size_t L = layers_.size();
    if (cache.pre_acts.size() != L || static_cast<int>(grad_z.size()) != output_dim() ||
        out.weights.size() != L)
        throw std::invalid_argument("backward: shape mismatch with cache or grads");

    Vec delta(grad_z.begin(), grad_z.end());
    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = layers_[l];
        if (layer.act == Activation::Relu) {
            const Vec& pre = cache.pre_acts[l];
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (pre[i] <= 0.0) delta[i] = 0.0;
        }
        const Vec& below = l == 0 ? cache.input : cache.acts[l - 1];
        out.weights[l].add_outer(delta, below);
        for (std::size_t i = 0; i < delta.size(); ++i) out.biases[l][i] += delta[i];
        if (l > 0) delta = layer.w.tmatvec(delta);
    }
}

void Mlp::sgd_step(const ParamGrads& grads, double lr, double weight_decay) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: learning rate must be > 0");
    if (!grads.all_finite()) throw std::runtime_error("sgd_step: non-finite gradient");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& w = layers_[l].w.data();
        const auto& gw = grads.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= lr * (gw[i] + weight_decay * w[i]);
        auto& b = layers_[l].b;
        const auto& gb = grads.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] -= lr * (gb[i] + weight_decay * b[i]);
    }
}

std::unique_ptr<Model> Mlp::clone() const { return std::make_unique<Mlp>(*this); }

std::string Mlp::describe() const {
    std::ostringstream os;
    os << "mlp(" << input_dim();
    for (const auto& layer : layers_) os << " -> " << layer.w.rows();
    os << ")";
    return os.str();
}

namespace {

using nlohmann::json;

json matrix_to_json(const DenseMatrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

DenseMatrix matrix_from_json(const json& j) {
    DenseMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.data() = j.at("data").get<Vec>();
    if (m.data().size() != static_cast<std::size_t>(m.rows()) * m.cols())
        throw std::invalid_argument("checkpoint: weight array size mismatch");
    return m;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    json j;
    if (const auto* sr = dynamic_cast<const SoftmaxRegression*>(&model)) {
        j["type"] = "softmax_regression";
        j["theta"] = matrix_to_json(sr->theta());
    } else if (const auto* mlp = dynamic_cast<const Mlp*>(&model)) {
        j["type"] = "mlp";
        json layers = json::array();
        for (const auto& layer : mlp->layers()) {
            layers.push_back({{"w", matrix_to_json(layer.w)},
                              {"b", layer.b},
                              {"act", layer.act == Activation::Relu ? "relu" : "identity"}});
        }
        j["layers"] = layers;
    } else {
        throw std::invalid_argument("save_checkpoint: unknown model type");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump(2) << "\n";
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    json j;
    in >> j;
    const std::string type = j.at("type").get<std::string>();
    if (type == "softmax_regression")
        return std::make_unique<SoftmaxRegression>(matrix_from_json(j.at("theta")));
    if (type == "mlp") {
        std::vector<Mlp::Layer> layers;
        for (const auto& lj : j.at("layers")) {
            Mlp::Layer layer;
            layer.w = matrix_from_json(lj.at("w"));
            layer.b = lj.at("b").get<Vec>();
            layer.act = lj.at("act").get<std::string>() == "relu" ? Activation::Relu
                                                                  : Activation::Identity;
            layers.push_back(std::move(layer));
        }
        return std::make_unique<Mlp>(std::move(layers));
    }
    throw std::invalid_argument("load_checkpoint: unknown model type " + type);
}

}  // namespace pllab
