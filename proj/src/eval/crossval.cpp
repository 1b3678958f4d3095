#include "paratope/eval/crossval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"
#include "paratope/errors.hpp"

namespace paratope {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double x) {
    return std::isfinite(x) ? json(x) : json(nullptr);
}

double number_from(const json& j) {
    return j.is_null() ? kNaN : j.get<double>();
}

MetricSummary summarize_metric(const std::vector<FoldResult>& folds, std::size_t runs,
                               double FoldResult::*metric) {
    MetricSummary s;
    for (std::size_t r = 0; r < runs; ++r) {
        double sum = 0;
        std::size_t n = 0;
        for (const FoldResult& f : folds) {
            if (f.run == r && std::isfinite(f.*metric)) {
                sum += f.*metric;
                ++n;
            }
        }
        s.run_means.push_back(n ? sum / static_cast<double>(n) : kNaN);
    }
    std::vector<double> finite;
    std::copy_if(s.run_means.begin(), s.run_means.end(), std::back_inserter(finite),
                 [](double x) { return std::isfinite(x); });
    if (finite.size() >= 2) {
        s.interval = confidence_interval(finite);
    } else {
        s.interval = {finite.empty() ? kNaN : finite.front(), kNaN, kNaN};
    }
    return s;
}

json summary_json(const MetricSummary& s) {
    json means = json::array();
    for (double x : s.run_means) means.push_back(number(x));
    return {{"run_means", means},
            {"mean", number(s.interval.mean)},
            {"ci_low", number(s.interval.low)},
            {"ci_high", number(s.interval.high)}};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("crossvalidation needs at least 2 folds");
    if (n < folds) {
        throw ValidationError("crossvalidation with " + std::to_string(folds) + " folds needs at least " +
                              std::to_string(folds) + " complexes, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % folds;
    return fold;
}

EvalReport crossvalidate(std::span<const Complex> complexes, const ModelConfig& model, const TrainConfig& train,
                         const CrossvalConfig& config) {
    if (config.runs == 0) throw ValidationError("crossvalidation needs at least 1 run");
    train.validate();
    std::vector<std::vector<std::size_t>> assignments;
    for (std::size_t r = 0; r < config.runs; ++r) {
        assignments.push_back(fold_assignment(complexes.size(), config.folds, derive_seed(config.seed, r)));
    }

    EvalReport report;
    report.model = model.kind;
    report.config = config;
    report.folds.resize(config.runs * config.folds);
    const std::vector<SampleRef> samples = all_samples(complexes);

    auto run_fold = [&](std::size_t task) {
        const std::size_t r = task / config.folds, k = task % config.folds;
        const std::vector<std::size_t>& fold = assignments[r];
        std::vector<SampleRef> train_set, test_set;
        for (const SampleRef& s : samples) (fold[s.complex] == k ? test_set : train_set).push_back(s);
        TrainConfig tc = train;
        tc.seed = derive_seed(config.seed, r, k + 1);
        TrainResult trained = paratope::train(model, complexes, train_set, {}, tc);
        const Evaluation ev = evaluate(trained.params, complexes, test_set, tc.batch_size);

        FoldResult& out = report.folds[task];
        out.run = r;
        out.fold = k;
        for (std::size_t c = 0; c < complexes.size(); ++c) {
            if (fold[c] == k) out.test_complexes.push_back(complexes[c].id);
        }
        out.test_residues = ev.scores.size();
        const bool has_pos = std::any_of(ev.labels.begin(), ev.labels.end(), [](auto y) { return y != 0; });
        const bool has_neg = std::any_of(ev.labels.begin(), ev.labels.end(), [](auto y) { return y == 0; });
        out.roc_auc = has_pos && has_neg ? roc_auc(ev.scores, ev.labels) : kNaN;
        out.mcc = paratope::mcc(ev.scores, ev.labels, {}, config.threshold);
        if (has_pos) out.pr = pr_curve(ev.scores, ev.labels);
    };

    const std::size_t tasks = report.folds.size();
    const std::size_t workers = std::clamp<std::size_t>(config.jobs, 1, tasks);
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks; ++t) run_fold(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < tasks; t = next++) {
                    try {
                        run_fold(t);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = tasks;
                    }
                }
            });
        }
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }
    summarize(report);
    return report;
}

void summarize(EvalReport& report) {
    report.roc_auc = summarize_metric(report.folds, report.config.runs, &FoldResult::roc_auc);
    report.mcc = summarize_metric(report.folds, report.config.runs, &FoldResult::mcc);
}

std::string EvalReport::to_json() const {
    json folds_json = json::array();
    for (const FoldResult& f : folds) {
        json pr = json::array();
        for (const PrPoint& p : f.pr) pr.push_back({p.threshold, p.precision, p.recall});
        folds_json.push_back({{"run", f.run},
                              {"fold", f.fold},
                              {"test_complexes", f.test_complexes},
                              {"test_residues", f.test_residues},
                              {"roc_auc", number(f.roc_auc)},
                              {"mcc", number(f.mcc)},
                              {"pr_curve", pr}});
    }
    json j;
    j["model"] = std::string(model_kind_name(model));
    j["runs"] = config.runs;
    j["folds"] = config.folds;
    j["seed"] = config.seed;
    j["threshold"] = config.threshold;
    j["fold_results"] = std::move(folds_json);
    j["roc_auc"] = summary_json(roc_auc);
    j["mcc"] = summary_json(mcc);
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        EvalReport r;
        const auto kind = model_kind_from_name(j.at("model").get<std::string>());
        if (!kind) throw ParseError("report: unknown model kind");
        r.model = *kind;
        r.config.runs = j.at("runs").get<std::size_t>();
        r.config.folds = j.at("folds").get<std::size_t>();
        r.config.seed = j.at("seed").get<std::uint64_t>();
        r.config.threshold = j.at("threshold").get<double>();
        for (const json& f : j.at("fold_results")) {
            FoldResult fr;
            fr.run = f.at("run").get<std::size_t>();
            fr.fold = f.at("fold").get<std::size_t>();
            fr.test_complexes = f.at("test_complexes").get<std::vector<std::string>>();
            fr.test_residues = f.at("test_residues").get<std::size_t>();
            fr.roc_auc = number_from(f.at("roc_auc"));
            fr.mcc = number_from(f.at("mcc"));
            for (const json& p : f.at("pr_curve")) {
                fr.pr.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
            }
            r.folds.push_back(std::move(fr));
        }
        summarize(r);
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
}

void write_fold_csv(std::ostream& out, const EvalReport& report) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "run,fold,roc_auc,mcc,test_complexes,test_residues\n";
    for (const FoldResult& f : report.folds) {
        out << f.run << ',' << f.fold << ',' << f.roc_auc << ',' << f.mcc << ',' << f.test_complexes.size() << ','
            << f.test_residues << '\n';
    }
    out.precision(old);
}

void write_pr_csv(std::ostream& out, const EvalReport& report) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    out << "run,fold,threshold,precision,recall\n";
    for (const FoldResult& f : report.folds) {
        for (const PrPoint& p : f.pr) {
            out << f.run << ',' << f.fold << ',' << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
        }
    }
    out.precision(old);
}

}  // namespace paratope
