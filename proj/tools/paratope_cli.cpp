#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "paratope/data/dataset.hpp"
#include "paratope/data/neighborhood.hpp"
#include "paratope/data/synthetic.hpp"
#include "paratope/errors.hpp"
#include "paratope/eval/crossval.hpp"
#include "paratope/model/model.hpp"
#include "paratope/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace paratope;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, numeric = 3 };

struct Options {
    std::string dataset;
    std::string model = "fast";
    std::string out = "out";
    std::string weights;
    std::string neighborhood;
    std::size_t cap = kDefaultNeighborhoodCap;
    std::size_t folds = 10;
    std::size_t runs = 10;
    std::size_t jobs = 1;
    double threshold = 0.5;
    bool filter = false;
    bool quiet = false;
    TrainConfig train;

    // synth
    std::string output;
    SyntheticSpec synth;
    std::string labels = "motif";
};

class UsageError : public Error {
public:
    using Error::Error;
};

ModelKind parse_kind(const std::string& name) {
    const auto kind = model_kind_from_name(name);
    if (!kind) throw UsageError("unknown model '" + name + "'; expected fast or ag-fast");
    return *kind;
}

std::vector<Complex> load_dataset(const Options& opt, std::optional<ModelKind> kind) {
    if (opt.dataset.empty()) throw UsageError("--dataset is required");
    if (!fs::exists(opt.dataset)) throw ParseError("dataset not found: " + opt.dataset);
    ParseOptions parse;
    parse.neighborhood_cap = opt.cap;
    std::vector<Complex> complexes = parse_dataset(opt.dataset, parse);
    if (opt.filter) complexes = filter_complexes(complexes);
    if (complexes.empty()) throw ValidationError("dataset " + opt.dataset + " holds no usable complexes");

    NeighborhoodConfig nc;
    nc.cap = opt.cap;
    if (!opt.neighborhood.empty()) {
        nc.policy = policy_from_name(opt.neighborhood);
        if (!nc.policy) throw UsageError("unknown neighborhood policy '" + opt.neighborhood + "'");
        nc.overwrite = true;
    }
    if (kind == ModelKind::ag_fast) {
        for (const Complex& c : complexes) {
            if (!c.has_antigen()) {
                throw ValidationError("model ag-fast needs antigen data but complex '" + c.id + "' in " + opt.dataset +
                                      " has none; add an \"antigen\" field or use --model fast");
            }
        }
        attach_neighborhoods(complexes, nc);
    }
    return complexes;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << text;
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    fn(out);
}

nlohmann::json train_config_json(const TrainConfig& t) {
    nlohmann::json j{{"learning_rate", t.learning_rate}, {"epochs", t.epochs},
                     {"batch_size", t.batch_size},       {"l2", t.l2},
                     {"final_dropout", t.final_dropout}, {"hidden_dropout", t.hidden_dropout},
                     {"seed", t.seed},                   {"class_weighting", t.class_weighting}};
    if (t.clip_norm) j["clip_norm"] = *t.clip_norm;
    return j;
}

ModelParams<float> load_weights(const Options& opt, std::optional<ModelKind> expected) {
    const fs::path path = opt.weights.empty() ? fs::path(opt.out) / "weights" / "model.ptw" : fs::path(opt.weights);
    if (!fs::exists(path)) throw ParseError("weights not found: " + path.string());
    ModelParams<float> params = ModelParams<float>::load(path);
    if (expected && params.kind() != *expected) {
        throw VersionError("weights in " + path.string() + " are for model '" +
                           std::string(model_kind_name(params.kind())) + "', not '" +
                           std::string(model_kind_name(*expected)) + "'");
    }
    return params;
}

int cmd_train(const Options& opt) {
    const ModelKind kind = parse_kind(opt.model);
    const std::vector<Complex> complexes = load_dataset(opt, kind);
    ModelConfig mc;
    mc.kind = kind;
    const std::vector<SampleRef> samples = all_samples(complexes);
    TrainResult result = train(mc, complexes, samples, {}, opt.train, [&](const EpochLog& e) {
        if (!opt.quiet) std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << '\n';
    });
    const fs::path out(opt.out);
    fs::create_directories(out / "weights");
    result.params.save(out / "weights" / "model.ptw");
    nlohmann::json snapshot{{"dataset", opt.dataset},
                            {"model", nlohmann::json::parse(result.params.config.to_json())},
                            {"train", train_config_json(opt.train)},
                            {"neighborhood", opt.neighborhood.empty() ? "auto" : opt.neighborhood},
                            {"cap", opt.cap}};
    write_text(out / "weights" / "config.json", snapshot.dump(2) + "\n");
    write_with(out / "logs" / "train_log.csv", [&](std::ostream& s) { write_training_log(s, result.log); });
    if (!opt.quiet) std::cerr << "weights written to " << (out / "weights" / "model.ptw").string() << '\n';
    return Exit::ok;
}

int cmd_crossval(const Options& opt) {
    const ModelKind kind = parse_kind(opt.model);
    const std::vector<Complex> complexes = load_dataset(opt, kind);
    ModelConfig mc;
    mc.kind = kind;
    CrossvalConfig cv{opt.runs, opt.folds, opt.train.seed, opt.threshold, opt.jobs};
    const EvalReport report = crossvalidate(complexes, mc, opt.train, cv);
    const fs::path dir = fs::path(opt.out) / "reports";
    write_text(dir / "crossval.json", report.to_json() + "\n");
    write_with(dir / "folds.csv", [&](std::ostream& s) { write_fold_csv(s, report); });
    write_with(dir / "pr_curves.csv", [&](std::ostream& s) { write_pr_csv(s, report); });
    if (!opt.quiet) {
        std::cout << "roc_auc " << report.roc_auc.interval.mean << " [" << report.roc_auc.interval.low << ", "
                  << report.roc_auc.interval.high << "]\n"
                  << "mcc " << report.mcc.interval.mean << " [" << report.mcc.interval.low << ", "
                  << report.mcc.interval.high << "]\n";
    }
    return Exit::ok;
}

int cmd_predict(const Options& opt, bool model_given) {
    ModelParams<float> params = load_weights(opt, model_given ? std::optional(parse_kind(opt.model)) : std::nullopt);
    const std::vector<Complex> complexes = load_dataset(opt, params.kind());
    const std::vector<SampleRef> samples = all_samples(complexes);
    const std::vector<ResiduePrediction> preds = predict(params, complexes, samples, opt.train.batch_size);
    write_with(fs::path(opt.out) / "reports" / "predictions.csv", [&](std::ostream& s) {
        s.precision(9);
        s << "complex,chain,residue,aa,probability,label\n";
        for (const ResiduePrediction& p : preds) {
            s << p.complex_id << ',' << chain_name(p.chain) << ',' << p.residue << ',' << amino_acid_letter(p.aa) << ','
              << p.probability << ',' << int(p.label) << '\n';
        }
    });
    return Exit::ok;
}

int cmd_export_attention(const Options& opt) {
    ModelParams<float> params = load_weights(opt, std::nullopt);
    if (params.kind() != ModelKind::ag_fast) {
        throw ValidationError("attention export needs ag-fast weights; these are for model 'fast'");
    }
    const std::vector<Complex> complexes = load_dataset(opt, params.kind());
    const std::vector<AttentionRecord> records = export_attention(params, complexes);
    write_with(fs::path(opt.out) / "attention" / "attention.jsonl",
               [&](std::ostream& s) { write_attention(s, records); });
    return Exit::ok;
}

int cmd_synth(Options opt) {
    if (opt.output.empty()) throw UsageError("--output is required");
    if (opt.labels == "motif") {
        opt.synth.labels = SyntheticLabels::motif;
    } else if (opt.labels == "antigen") {
        opt.synth.labels = SyntheticLabels::antigen;
    } else {
        throw UsageError("unknown label scheme '" + opt.labels + "'; expected motif or antigen");
    }
    opt.synth.seed = opt.train.seed;
    const std::vector<Complex> complexes = make_synthetic(opt.synth);
    if (fs::path(opt.output).has_parent_path()) fs::create_directories(fs::path(opt.output).parent_path());
    write_dataset(fs::path(opt.output), complexes);
    return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Paratope prediction with Fast-Parapred and AG-Fast-Parapred"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value file; command-line flags take precedence");

    Options opt;
    app.add_option("--dataset", opt.dataset, "JSONL dataset");
    app.add_option("--model", opt.model, "fast or ag-fast");
    app.add_option("--out", opt.out, "Output directory (weights/, logs/, reports/, attention/)");
    app.add_option("--weights", opt.weights, "Weight file (default <out>/weights/model.ptw)");
    app.add_option("--epochs", opt.train.epochs);
    app.add_option("--batch-size", opt.train.batch_size);
    app.add_option("--lr", opt.train.learning_rate);
    app.add_option("--l2", opt.train.l2);
    app.add_option("--dropout", opt.train.final_dropout, "Dropout before the classifier");
    app.add_option("--hidden-dropout", opt.train.hidden_dropout, "Dropout after each convolution block");
    app.add_option("--clip-norm", opt.train.clip_norm, "Clip gradients to this global norm");
    app.add_flag("--class-weighting", opt.train.class_weighting, "Inverse-frequency class weights in the loss");
    app.add_option("--seed", opt.train.seed);
    app.add_option("--folds", opt.folds);
    app.add_option("--runs", opt.runs);
    app.add_option("--jobs", opt.jobs, "Folds trained concurrently");
    app.add_option("--neighborhood", opt.neighborhood, "spatial or window (default: spatial when coordinates exist)");
    app.add_option("--cap", opt.cap, "Neighborhood size cap");
    app.add_option("--threshold", opt.threshold, "MCC decision threshold");
    app.add_flag("--filter", opt.filter, "Apply the resolution, identity and positive-count filters");
    app.add_flag("--quiet", opt.quiet);
    app.add_option("--output", opt.output, "synth: destination file");
    app.add_option("--complexes", opt.synth.complexes, "synth: number of complexes");
    app.add_option("--antigen-length", opt.synth.antigen_length, "synth: antigen length");
    app.add_option("--labels", opt.labels, "synth: motif or antigen");

    auto* train_cmd = app.add_subcommand("train", "Train a model and save weights and a log");
    auto* crossval_cmd = app.add_subcommand("crossval", "Repeated k-fold crossvalidation");
    auto* predict_cmd = app.add_subcommand("predict", "Per-residue binding probabilities");
    auto* export_cmd = app.add_subcommand("export-attention", "Cross-modal attention coefficients");
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
    for (CLI::App* sub : {train_cmd, crossval_cmd, predict_cmd, export_cmd, synth_cmd}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::usage;
    }

    try {
        opt.train.validate();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::usage;
    }

    try {
        const bool model_given = app.count("--model") > 0;
        if (*train_cmd) return cmd_train(opt);
        if (*crossval_cmd) return cmd_crossval(opt);
        if (*predict_cmd) return cmd_predict(opt, model_given);
        if (*export_cmd) return cmd_export_attention(opt);
        return cmd_synth(opt);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::usage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return Exit::numeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::data;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::data;
    }
}
