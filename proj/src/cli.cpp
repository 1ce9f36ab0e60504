#include "pllab/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pllab/datagen.hpp"
#include "pllab/dynamics.hpp"
#include "pllab/losses.hpp"
#include "pllab/models.hpp"
#include "pllab/propcheck.hpp"
#include "pllab/trainer.hpp"

namespace pllab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

std::string out_dir() {
    if (const char* env = std::getenv("PLLAB_OUT_DIR")) return env;
    return ".";
}

std::string resolve_out(const std::string& path, const std::string& fallback_name) {
    if (!path.empty()) return path;
    const fs::path dir(out_dir());
    fs::create_directories(dir);
    return (dir / fallback_name).string();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

json provenance(const json& config) {
    std::ostringstream hash;
    hash << std::hex << fnv1a(config.dump());
    return json{{"tool", "pllab"},
                {"version", kVersion},
                {"config", config},
                {"config_hash", hash.str()}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

Vec parse_double_list(const std::string& csv) {
    Vec out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stod(cell));
    return out;
}

std::vector<LabelVector> parse_label_sets(const std::string& spec, int m) {
    std::vector<LabelVector> sets;
    std::stringstream ss(spec);
    std::string group;
    while (std::getline(ss, group, ';')) {
        const auto idx = parse_int_list(group);
        sets.push_back(LabelVector::from_indices(m, idx));
    }
    if (sets.empty()) throw CLI::ValidationError("--labels", "no label sets given");
    return sets;
}

std::pair<int, double> parse_coord_threshold(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("stop rule", "expected index:threshold, got " + s);
    return {std::stoi(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
}

// Shared loss flags; every subcommand that evaluates a loss takes these.
struct LossOptions {
    std::string name = "libra";
    double beta = 0.5;
    bool fit_weight = false;
    double logit_l2 = 0.0;
    double neg_gamma = 0.0;
    int neg_samples = 50;
    bool lws_flip_sigma = false;

    void attach(CLI::App& cmd) {
        cmd.add_option("--loss", name, "loss kind: nll|libra|sag|uniform|merit|lws|rc")
            ->capture_default_str();
        cmd.add_option("--beta", beta, "merit/lws beta")->capture_default_str();
        cmd.add_flag("--libra-fit-weight,!--no-libra-fit-weight", fit_weight,
                     "scale libra by 1 - p_hat (training defaults to on)");
        cmd.add_option("--logit-l2", logit_l2, "sag logit L2 coefficient gamma_z")
            ->capture_default_str();
        cmd.add_option("--neg-gamma", neg_gamma, "negative-term weight gamma")->capture_default_str();
        cmd.add_option("--neg-samples", neg_samples, "negative label sets sampled per step")
            ->capture_default_str();
        cmd.add_flag("--lws-conventional-sigma", lws_flip_sigma,
                     "use the increasing sigmoid in lws instead of the printed one");
    }

    LossKind kind() const { return loss_kind_from_name(name); }

    LossParams params(bool tolerant) const {
        LossParams p;
        p.beta = beta;
        p.libra_fit_weight = fit_weight;
        p.logit_l2_gamma = logit_l2;
        p.neg_gamma = neg_gamma;
        p.neg_sample_count = neg_samples;
        p.tolerant = tolerant;
        p.lws_decreasing_sigma = !lws_flip_sigma;
        return p;
    }

    json to_json() const {
        return json{{"loss", name},           {"beta", beta},
                    {"libra_fit_weight", fit_weight}, {"logit_l2", logit_l2},
                    {"neg_gamma", neg_gamma}, {"neg_samples", neg_samples},
                    {"lws_conventional_sigma", lws_flip_sigma}};
    }
};

struct ModelOptions {
    std::string arch = "mlp";
    std::string hidden = "50";

    void attach(CLI::App& cmd) {
        cmd.add_option("--model", arch, "architecture: softmax|mlp")->capture_default_str();
        cmd.add_option("--hidden", hidden, "mlp hidden widths, comma separated")
            ->capture_default_str();
    }

    std::unique_ptr<Model> build(int d, int m, Rng& rng) const {
        if (arch == "softmax") return std::make_unique<SoftmaxRegression>(SoftmaxRegression::init(d, m, rng));
        if (arch == "mlp")
            return std::make_unique<Mlp>(Mlp::init(d, parse_int_list(hidden), m, rng));
        throw CLI::ValidationError("--model", "unknown architecture " + arch);
    }

    json to_json() const { return json{{"model", arch}, {"hidden", hidden}}; }
};

// ---- gen ----------------------------------------------------------------

struct GenArgs {
    std::string generator;
    std::uint64_t seed = 0;
    std::string out;
    int n = 1000, d = 10, m = 20;
    double rdpool = 0.5, rdocc = 0.5, sigma = 1.0;
    int noise_case = 1;
    std::string matrix_csv;
};

int cmd_gen(const GenArgs& a) {
    Dataset data;
    json cfg = {{"generator", a.generator}, {"seed", a.seed}};
    if (a.generator == "small-consistent") {
        data = gen_small_consistent();
    } else if (a.generator == "large-consistent") {
        cfg.update({{"n", a.n}, {"d", a.d}, {"m", a.m}, {"rdpool", a.rdpool},
                    {"rdocc", a.rdocc}, {"sigma", a.sigma}});
        Rng rng(a.seed);
        data = gen_large_consistent(a.n, a.d, a.m, {a.rdpool, a.rdocc}, a.sigma, rng);
    } else if (a.generator == "noise-case") {
        cfg.update({{"n", a.n}, {"d", a.d}, {"sigma", a.sigma}, {"case", a.noise_case},
                    {"matrix_csv", a.matrix_csv}});
        Rng rng(a.seed);
        const NoiseMatrix noise = a.matrix_csv.empty() ? builtin_case_matrix(a.noise_case)
                                                       : NoiseMatrix::from_csv(a.matrix_csv);
        const Dataset truth = gen_cluster_truth(a.n, a.d, noise.size(), a.sigma, rng);
        data = apply_noise(truth, noise, rng);
    } else {
        throw CLI::ValidationError("generator", "unknown generator " + a.generator);
    }

    json prov = json::parse(data.provenance.empty() ? "{}" : data.provenance);
    prov["run"] = provenance(cfg);
    data.provenance = prov.dump();

    const std::string path = resolve_out(a.out, a.generator + ".jsonl");
    save_jsonl(data, path);
    std::cout << "wrote " << path << " (n=" << data.n() << ", d=" << data.d << ", m=" << data.m
              << ")\n";
    return 0;
}

// ---- noise-matrix --------------------------------------------------------

int cmd_noise_matrix(int case_id, const std::string& out) {
    const NoiseMatrix noise = builtin_case_matrix(case_id);
    const std::string path = resolve_out(out, "case" + std::to_string(case_id) + ".csv");
    noise.to_csv(path);
    std::cout << "wrote " << path << " (expected distractors per row: "
              << noise.expected_distractors(0) << ")\n";
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string data_path;
    std::string eval_path;
    LossOptions loss;
    ModelOptions model;
    double lr = 0.1;
    int epochs = 100;
    int batch = 0;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    int eval_every = 1;
    std::string out_dir;
    bool save_model = false;
};

int cmd_train(const TrainArgs& a) {
    const Dataset data = load_jsonl(a.data_path);
    std::optional<Dataset> eval_data;
    if (!a.eval_path.empty()) eval_data = load_jsonl(a.eval_path);

    TrainConfig config;
    config.kind = a.loss.kind();
    config.params = a.loss.params(/*tolerant=*/true);
    config.learning_rate = a.lr;
    config.epochs = a.epochs;
    config.batch_size = a.batch;
    config.weight_decay = a.weight_decay;
    config.seed = a.seed;
    config.eval_every = a.eval_every;

    Rng init_rng(a.seed);
    auto model = a.model.build(data.d, data.m, init_rng);
    const TrainHistory history = train(data, *model, config, eval_data ? &*eval_data : nullptr);

    json cfg = a.loss.to_json();
    cfg.update(a.model.to_json());
    cfg.update({{"data", a.data_path}, {"lr", a.lr}, {"epochs", a.epochs}, {"batch", a.batch},
                {"weight_decay", a.weight_decay}, {"seed", a.seed}});
    const json prov = provenance(cfg);

    const fs::path dir = a.out_dir.empty() ? fs::path(out_dir()) : fs::path(a.out_dir);
    fs::create_directories(dir);

    {
        std::ofstream csv(dir / "history.csv");
        csv << "# " << prov.dump() << "\n";
        write_history_csv(history, csv);
    }
    json metrics;
    metrics["provenance"] = prov;
    json history_json = json::array();
    for (const EpochStats& e : history.epochs)
        history_json.push_back({{"epoch", e.epoch},         {"train_loss", e.train_loss},
                                {"train_acc", e.train_acc}, {"test_acc", e.test_acc},
                                {"p_pos", e.p_pos},         {"p_neg", e.p_neg}});
    metrics["history"] = std::move(history_json);
    const EpochStats& last = history.epochs.back();
    metrics["final"] = {{"epoch", last.epoch},       {"train_loss", last.train_loss},
                        {"train_acc", last.train_acc}, {"test_acc", last.test_acc},
                        {"p_pos", last.p_pos},       {"p_neg", last.p_neg}};
    write_text((dir / "metrics.json").string(), metrics.dump(2) + "\n");
    if (a.save_model) save_checkpoint(*model, (dir / "model.json").string());

    std::cout << "final train_loss=" << last.train_loss << " p_pos=" << last.p_pos;
    if (data.has_truth()) std::cout << " train_acc=" << last.train_acc;
    std::cout << "\nwrote " << (dir / "history.csv").string() << ", "
              << (dir / "metrics.json").string() << "\n";
    return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
    std::string data_path;
    LossOptions loss;
    ModelOptions model;
    double lr = 0.1;
    int epochs = 500;
    int batch = 0;
    std::uint64_t seed_base = 0;
    int num_seeds = 100;
    int optimal_output = -1;
    int threads = 0;
    double stop_delta = 0.0;
    int stop_patience = 10;
    double weight_decay = 0.0;
    std::string out_dir;
};

int cmd_sweep(const SweepArgs& a) {
    const Dataset data = load_jsonl(a.data_path);
    TrainConfig config;
    config.kind = a.loss.kind();
    config.params = a.loss.params(true);
    config.learning_rate = a.lr;
    config.epochs = a.epochs;
    config.batch_size = a.batch;
    config.weight_decay = a.weight_decay;
    if (a.stop_delta > 0.0) {
        config.early_stop = EarlyStop{a.stop_delta, a.stop_patience};
        config.eval_every = 1;  // plateau detection needs per-epoch stats
    } else {
        config.eval_every = a.epochs;  // sweeping cares about final state only
    }

    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(a.num_seeds));
    for (int i = 0; i < a.num_seeds; ++i) seeds[static_cast<std::size_t>(i)] = a.seed_base + i;

    const ModelOptions& mo = a.model;
    const int d = data.d, m = data.m;
    const SweepReport report =
        sweep(data, [&mo, d, m](Rng& rng) { return mo.build(d, m, rng); }, config, seeds,
              a.optimal_output >= 0 ? std::optional<int>(a.optimal_output) : std::nullopt,
              a.threads);

    json cfg = a.loss.to_json();
    cfg.update(a.model.to_json());
    cfg.update({{"data", a.data_path}, {"lr", a.lr}, {"epochs", a.epochs}, {"batch", a.batch},
                {"seed_base", a.seed_base}, {"num_seeds", a.num_seeds},
                {"optimal_output", a.optimal_output}});
    const json prov = provenance(cfg);

    const fs::path dir = a.out_dir.empty() ? fs::path(out_dir()) : fs::path(a.out_dir);
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "sweep.csv");
        csv << "# " << prov.dump() << "\n";
        write_sweep_csv(report, csv);
    }
    json summary;
    summary["provenance"] = prov;
    summary["success_rate"] = report.success_rate;
    summary["seeds"] = report.outcomes.size();
    json outcomes = json::array();
    for (const auto& o : report.outcomes) {
        json oj = {{"seed", o.seed}, {"success", o.success}, {"p_pos", o.p_pos},
                   {"train_acc", o.train_acc}};
        if (!o.error.empty()) oj["error"] = o.error;
        outcomes.push_back(std::move(oj));
    }
    summary["outcomes"] = std::move(outcomes);
    write_text((dir / "sweep.json").string(), summary.dump(2) + "\n");

    std::cout << "success_rate=" << report.success_rate << " over " << report.outcomes.size()
              << " seeds\nwrote " << (dir / "sweep.csv").string() << ", "
              << (dir / "sweep.json").string() << "\n";
    return 0;
}

// ---- dynamics ---------------------------------------------------------------

struct DynamicsArgs {
    int m = 3;
    std::string labels = "0,1";
    LossOptions loss;
    double lr = 1.0;
    int steps = 10000;
    std::string p0, z0;
    std::string stop_above, stop_below;
    double stop_grad_norm = 0.0;
    int field_resolution = 0;
    std::string out;
    std::string format = "csv";
    bool tolerant = false;
};

int cmd_dynamics(const DynamicsArgs& a) {
    json cfg = a.loss.to_json();
    cfg.update({{"m", a.m}, {"labels", a.labels}, {"lr", a.lr}, {"steps", a.steps},
                {"p0", a.p0}, {"z0", a.z0}, {"field", a.field_resolution}});
    const json prov = provenance(cfg);

    const auto labels = parse_label_sets(a.labels, a.m);

    const bool as_json = a.format == "json";
    if (!as_json && a.format != "csv")
        throw CLI::ValidationError("--format", "expected csv or json");

    if (a.field_resolution > 0) {
        const auto field = vector_field(a.loss.kind(), labels.front(), a.field_resolution, 1e-3,
                                        a.loss.params(a.tolerant));
        const std::string path = resolve_out(a.out, as_json ? "field.json" : "field.csv");
        if (as_json) {
            json j = json::parse(field_to_json(field));
            j["provenance"] = prov;
            write_text(path, j.dump(2) + "\n");
        } else {
            std::ofstream csv(path);
            csv << "# " << prov.dump() << "\n";
            write_field_csv(field, csv);
        }
        std::cout << "wrote " << path << " (" << field.size() << " grid points)\n";
        return 0;
    }

    Vec z0;
    if (!a.z0.empty()) {
        z0 = parse_double_list(a.z0);
    } else if (!a.p0.empty()) {
        const Vec p0 = parse_double_list(a.p0);
        z0.resize(p0.size());
        for (std::size_t i = 0; i < p0.size(); ++i) z0[i] = std::log(p0[i]);
    } else {
        z0.assign(static_cast<std::size_t>(a.m), 0.0);
    }
    if (static_cast<int>(z0.size()) != a.m)
        throw CLI::ValidationError("--p0/--z0", "length must equal m");

    DynamicsConfig config;
    config.kind = a.loss.kind();
    config.params = a.loss.params(a.tolerant);
    config.learning_rate = a.lr;
    config.max_steps = a.steps;
    if (!a.stop_above.empty()) config.stop.coord_above = parse_coord_threshold(a.stop_above);
    if (!a.stop_below.empty()) config.stop.coord_below = parse_coord_threshold(a.stop_below);
    if (a.stop_grad_norm > 0.0) config.stop.grad_norm_below = a.stop_grad_norm;

    const Trajectory traj = simulate(z0, labels, config);
    const std::string path = resolve_out(a.out, as_json ? "trajectory.json" : "trajectory.csv");
    if (as_json) {
        json j = json::parse(trajectory_to_json(traj));
        j["provenance"] = prov;
        write_text(path, j.dump(2) + "\n");
    } else {
        std::ofstream csv(path);
        csv << "# " << prov.dump() << "\n";
        write_trajectory_csv(traj, csv);
    }
    std::cout << "terminated: " << termination_reason_name(traj.reason) << " after "
              << traj.steps() << " steps";
    if (!traj.error.empty()) std::cout << " (" << traj.error << ")";
    std::cout << "\nwrote " << path << "\n";
    return 0;
}

// ---- check ------------------------------------------------------------------

struct CheckArgs {
    LossOptions loss;
    std::string property = "prp";
    std::string ms = "3,10";
    int points = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_check(const CheckArgs& a) {
    if (a.tol <= 0.0) throw CLI::ValidationError("--tol", "tolerance must be > 0");
    Property property;
    if (a.property == "prp") property = Property::Prp;
    else if (a.property == "biprp") property = Property::BiPrp;
    else throw CLI::ValidationError("--property", "expected prp or biprp");

    SamplePlan plan;
    plan.ms = parse_int_list(a.ms);
    plan.points_per_m = a.points;
    plan.seed = a.seed;

    const ResidualReport report =
        check_property(a.loss.kind(), a.loss.params(false), property, plan, a.tol);

    json cfg = a.loss.to_json();
    cfg.update({{"property", a.property}, {"ms", a.ms}, {"points", a.points}, {"tol", a.tol},
                {"seed", a.seed}});
    json out_json = json::parse(report.to_json());
    out_json["provenance"] = provenance(cfg);
    const std::string path = resolve_out(a.out, "check.json");
    write_text(path, out_json.dump(2) + "\n");

    std::cout << (report.pass ? "PASS" : "FAIL") << " " << a.loss.name << " " << a.property
              << ": max allowed residual " << report.max_allowed;
    if (property == Property::BiPrp)
        std::cout << ", max disallowed residual " << report.max_disallowed;
    std::cout << " at tolerance " << a.tol << "\nwrote " << path << "\n";
    return report.pass ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"pllab: partial-label loss laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (JSON lines)");
    gen->require_subcommand(1);
    gen->set_config("--config");
    auto add_gen_common = [&](CLI::App* sub) {
        sub->add_option("--seed", gen_args.seed, "generator seed")->capture_default_str();
        sub->add_option("--out", gen_args.out, "output path (.jsonl)");
    };
    auto* gsmall = gen->add_subcommand("small-consistent", "10 samples, m=100, shared input");
    add_gen_common(gsmall);
    auto* glarge = gen->add_subcommand("large-consistent",
                                       "Gaussian mixture on hypercube corners with distractors");
    add_gen_common(glarge);
    glarge->add_option("--n", gen_args.n)->capture_default_str();
    glarge->add_option("--d", gen_args.d)->capture_default_str();
    glarge->add_option("--m", gen_args.m)->capture_default_str();
    glarge->add_option("--rdpool", gen_args.rdpool, "distractor pool fraction, in (0,1]")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    glarge->add_option("--rdocc", gen_args.rdocc, "distractor occurrence probability, in [0,1]")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    glarge->add_option("--sigma", gen_args.sigma)->capture_default_str();
    auto* gnoise = gen->add_subcommand("noise-case", "truth clusters corrupted by a noise matrix");
    add_gen_common(gnoise);
    gnoise->add_option("--case", gen_args.noise_case, "built-in case 1..5")
        ->check(CLI::Range(1, 5))
        ->capture_default_str();
    gnoise->add_option("--matrix", gen_args.matrix_csv, "CSV noise matrix (overrides --case)");
    gnoise->add_option("--n", gen_args.n)->capture_default_str();
    gnoise->add_option("--d", gen_args.d)->capture_default_str();
    gnoise->add_option("--sigma", gen_args.sigma)->capture_default_str();

    int nm_case = 1;
    std::string nm_out;
    auto* noise_matrix = app.add_subcommand("noise-matrix", "export a built-in noise matrix as CSV");
    noise_matrix->add_option("--case", nm_case, "case 1..5")->check(CLI::Range(1, 5))->required();
    noise_matrix->add_option("--out", nm_out, "output CSV path");

    TrainArgs train_args;
    train_args.loss.fit_weight = true;  // training default; theory surfaces stay exact
    auto* train = app.add_subcommand("train", "train one model on a dataset");
    train->set_config("--config");
    train->add_option("--data", train_args.data_path, "dataset (.jsonl)")->required();
    train->add_option("--eval", train_args.eval_path, "held-out dataset for test accuracy");
    train_args.loss.attach(*train);
    train_args.model.attach(*train);
    train->add_option("--lr", train_args.lr)->capture_default_str();
    train->add_option("--epochs", train_args.epochs)->capture_default_str();
    train->add_option("--batch", train_args.batch, "batch size (0 = full batch)")
        ->capture_default_str();
    train->add_option("--weight-decay", train_args.weight_decay)->capture_default_str();
    train->add_option("--seed", train_args.seed)->capture_default_str();
    train->add_option("--eval-every", train_args.eval_every)->capture_default_str();
    train->add_option("--out-dir", train_args.out_dir, "directory for history.csv/metrics.json");
    train->add_flag("--save-model", train_args.save_model, "write model.json checkpoint");

    SweepArgs sweep_args;
    sweep_args.loss.fit_weight = true;
    auto* sweepc = app.add_subcommand("sweep", "train across seeds and report the success rate");
    sweepc->set_config("--config");
    sweepc->add_option("--data", sweep_args.data_path, "dataset (.jsonl)")->required();
    sweep_args.loss.attach(*sweepc);
    sweep_args.model.attach(*sweepc);
    sweepc->add_option("--lr", sweep_args.lr)->capture_default_str();
    sweepc->add_option("--epochs", sweep_args.epochs)->capture_default_str();
    sweepc->add_option("--batch", sweep_args.batch)->capture_default_str();
    sweepc->add_option("--seeds", sweep_args.num_seeds, "number of seeds")->capture_default_str();
    sweepc->add_option("--seed-base", sweep_args.seed_base)->capture_default_str();
    sweepc->add_option("--optimal-output", sweep_args.optimal_output,
                       "success = trained argmax equals this output");
    sweepc->add_option("--threads", sweep_args.threads, "0 = hardware concurrency")
        ->capture_default_str();
    sweepc->add_option("--stop-delta", sweep_args.stop_delta,
                       "stop a run once the train loss stops improving by this much");
    sweepc->add_option("--stop-patience", sweep_args.stop_patience,
                       "epochs without improvement before stopping")
        ->capture_default_str();
    sweepc->add_option("--weight-decay", sweep_args.weight_decay)->capture_default_str();
    sweepc->add_option("--out-dir", sweep_args.out_dir);

    DynamicsArgs dyn_args;
    auto* dynamics = app.add_subcommand("dynamics", "single-input gradient dynamics on logits");
    dynamics->set_config("--config");
    dynamics->add_option("--m", dyn_args.m, "number of outputs")->capture_default_str();
    dynamics->add_option("--labels", dyn_args.labels,
                         "label sets, e.g. \"0,1;0,2\" for {A,B} and {A,C}")
        ->capture_default_str();
    dyn_args.loss.attach(*dynamics);
    dynamics->add_option("--lr", dyn_args.lr)->capture_default_str();
    dynamics->add_option("--steps", dyn_args.steps)->capture_default_str();
    dynamics->add_option("--p0", dyn_args.p0, "initial probabilities, comma separated");
    dynamics->add_option("--z0", dyn_args.z0, "initial logits, comma separated");
    dynamics->add_option("--stop-above", dyn_args.stop_above, "stop when p[i] > thr (i:thr)");
    dynamics->add_option("--stop-below", dyn_args.stop_below, "stop when p[i] < thr (i:thr)");
    dynamics->add_option("--stop-grad-norm", dyn_args.stop_grad_norm,
                         "stop when max |grad| < eps");
    dynamics->add_option("--field", dyn_args.field_resolution,
                         "emit a simplex vector field at this resolution instead of a trajectory");
    dynamics->add_flag("--tolerant", dyn_args.tolerant, "clamp boundary values instead of stopping");
    dynamics->add_option("--format", dyn_args.format, "csv|json")->capture_default_str();
    dynamics->add_option("--out", dyn_args.out, "output path");

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "residual check of the ratio-preservation property");
    check->set_config("--config");
    check_args.loss.attach(*check);
    check->add_option("--property", check_args.property, "prp|biprp")->capture_default_str();
    check->add_option("--ms", check_args.ms, "output sizes, comma separated")->capture_default_str();
    check->add_option("--points", check_args.points, "points per m")->capture_default_str();
    check->add_option("--tol", check_args.tol, "residual tolerance")->capture_default_str();
    check->add_option("--seed", check_args.seed)->capture_default_str();
    check->add_option("--out", check_args.out, "report path (.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForVersion") {
            return app.exit(e);
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            for (auto* sub : gen->get_subcommands()) gen_args.generator = sub->get_name();
            return cmd_gen(gen_args);
        }
        if (noise_matrix->parsed()) return cmd_noise_matrix(nm_case, nm_out);
        if (train->parsed()) return cmd_train(train_args);
        if (sweepc->parsed()) return cmd_sweep(sweep_args);
        if (dynamics->parsed()) return cmd_dynamics(dyn_args);
        if (check->parsed()) return cmd_check(check_args);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace pllab
