#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "paratope/data/synthetic.hpp"
#include "paratope/errors.hpp"
#include "paratope/eval/crossval.hpp"
#include "paratope/eval/metrics.hpp"
#include "paratope/train/trainer.hpp"

using namespace paratope;

namespace {

using Labels = std::vector<std::uint8_t>;
using Scores = std::vector<double>;

double pairwise_auc(const Scores& s, const Labels& y) {
    double wins = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            ++pairs;
            wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    }
    return wins / double(pairs);
}

std::vector<double> distinct_descending(const Scores& s) {
    std::vector<double> t(s);
    std::sort(t.begin(), t.end(), std::greater<>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

Confusion count(const Scores& s, const Labels& y, double threshold) {
    Confusion c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool pred = s[i] >= threshold;
        (pred ? (y[i] ? c.tp : c.fp) : (y[i] ? c.fn : c.tn))++;
    }
    return c;
}

// Area under the (FPR, TPR) polyline swept over every distinct threshold.
double trapezoid_auc(const Scores& s, const Labels& y) {
    const double pos = double(std::count(y.begin(), y.end(), 1));
    const double neg = double(y.size()) - pos;
    double area = 0, x0 = 0, y0 = 0;
    for (double t : distinct_descending(s)) {
        const Confusion c = count(s, y, t);
        const double x1 = c.fp / neg, y1 = c.tp / pos;
        area += (x1 - x0) * (y1 + y0) / 2;
        x0 = x1;
        y0 = y1;
    }
    return area;
}

double mcc_formula(double tp, double tn, double fp, double fn) {
    const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    return den == 0 ? 0.0 : (tp * tn - fp * fn) / den;
}

std::vector<Complex> fixture(std::size_t complexes, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.complexes = complexes;
    spec.seed = seed;
    return make_synthetic(spec);
}

}  // namespace

TEST(RocAuc, Examples) {
    EXPECT_EQ(roc_auc(Scores{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}), 1.0);
    EXPECT_EQ(roc_auc(Scores{0.9, 0.8, 0.2, 0.1}, Labels{0, 0, 1, 1}), 0.0);
    EXPECT_EQ(roc_auc(Scores{0.5, 0.5}, Labels{0, 1}), 0.5);
    EXPECT_EQ(roc_auc(Scores{0.9, 0.1, 0.3, 0.2}, Labels{0, 1, 1, 0}, Labels{0, 1, 1, 1}), 0.5);
    EXPECT_THROW(roc_auc(Scores{0.1, 0.2}, Labels{1, 1}), ValidationError);
    EXPECT_THROW(roc_auc(Scores{0.1}, Labels{1, 0}), ShapeError);
    EXPECT_THROW(roc_auc(Scores{std::nan(""), 0.2}, Labels{1, 0}), NumericError);
}

TEST(Metrics, ExhaustiveSmallInputsMatchBruteForce) {
    // Scores on a coarse grid so ties are common.
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> grid(0, 4);
    std::size_t cases = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
            Labels y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = (bits >> i) & 1u;
            for (int draw = 0; draw < 3; ++draw) {
                Scores s(n);
                for (double& v : s) v = grid(rng) / 4.0;
                const auto pos = std::count(y.begin(), y.end(), 1);
                const bool mixed = pos > 0 && pos < static_cast<long>(n);
                if (mixed) {
                    const double auc = roc_auc(s, y);
                    ASSERT_NEAR(auc, pairwise_auc(s, y), 1e-12);
                    ASSERT_NEAR(auc, trapezoid_auc(s, y), 1e-9);
                } else {
                    ASSERT_THROW(roc_auc(s, y), ValidationError);
                }
                for (double t : {0.0, 0.3, 0.5, 0.75, 1.0}) {
                    const Confusion want = count(s, y, t);
                    const Confusion got = confusion(s, y, {}, t);
                    ASSERT_EQ(got.tp, want.tp);
                    ASSERT_EQ(got.tn, want.tn);
                    ASSERT_EQ(got.fp, want.fp);
                    ASSERT_EQ(got.fn, want.fn);
                    ASSERT_NEAR(mcc(s, y, {}, t), mcc_formula(want.tp, want.tn, want.fp, want.fn), 1e-12);
                }
                if (pos > 0) {
                    const auto curve = pr_curve(s, y);
                    const auto thresholds = distinct_descending(s);
                    ASSERT_EQ(curve.size(), thresholds.size());
                    for (std::size_t k = 0; k < curve.size(); ++k) {
                        const Confusion c = count(s, y, thresholds[k]);
                        ASSERT_EQ(curve[k].threshold, thresholds[k]);
                        ASSERT_NEAR(curve[k].precision, double(c.tp) / double(c.tp + c.fp), 1e-12);
                        ASSERT_NEAR(curve[k].recall, double(c.tp) / double(pos), 1e-12);
                    }
                } else {
                    ASSERT_THROW(pr_curve(s, y), ValidationError);
                }
                ++cases;
            }
        }
    }
    EXPECT_EQ(cases, 3u * 510u);
}

TEST(RocAuc, RandomScoresNearHalf) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u;
    std::bernoulli_distribution coin(0.3);
    Scores s(100000);
    Labels y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        y[i] = coin(rng);
    }
    EXPECT_NEAR(roc_auc(s, y), 0.5, 0.01);
}

TEST(RocAuc, InvariantUnderMonotoneTransforms) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 50; ++trial) {
        Scores s(40);
        Labels y(40);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = std::round(u(rng) * 20) / 20;
            y[i] = coin(rng);
        }
        y[0] = 1;
        y[1] = 0;
        const double auc = roc_auc(s, y);
        Scores logit(s), cubed(s);
        for (double& v : logit) v = std::log(v / (1 - v));
        for (double& v : cubed) v = 3 * v * v * v + 1;
        EXPECT_EQ(roc_auc(logit, y), auc);
        EXPECT_EQ(roc_auc(cubed, y), auc);
    }
}

TEST(Mcc, Examples) {
    EXPECT_EQ(mcc(Scores{0.9, 0.1, 0.8, 0.2}, Labels{1, 0, 1, 0}), 1.0);
    EXPECT_EQ(mcc(Scores{0.9, 0.9, 0.8, 0.7}, Labels{1, 0, 1, 0}), 0.0);
    EXPECT_EQ(mcc(Confusion{0, 0, 0, 0}), 0.0);
    const double want = (90.0 * 80.0 - 20.0 * 10.0) / std::sqrt(110.0 * 100.0 * 100.0 * 90.0);
    EXPECT_DOUBLE_EQ(mcc(Confusion{90, 80, 20, 10}), want);
    EXPECT_EQ(mcc(Scores{0.5}, Labels{1}), 0.0);
}

TEST(Mcc, SymmetricUnderFlip) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> n(0, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const Confusion c{n(rng), n(rng), n(rng), n(rng)};
        EXPECT_NEAR(mcc(c), mcc(Confusion{c.tn, c.tp, c.fn, c.fp}), 1e-12);
        EXPECT_GE(mcc(c), -1.0);
        EXPECT_LE(mcc(c), 1.0);
    }
}

TEST(PrCurve, Examples) {
    const auto perfect = pr_curve(Scores{0.9, 0.8, 0.2, 0.1}, Labels{1, 1, 0, 0});
    EXPECT_NE(std::find(perfect.begin(), perfect.end(), PrPoint{0.8, 1.0, 1.0}), perfect.end());

    const auto flat = pr_curve(Scores{0.4, 0.4, 0.4, 0.4, 0.4}, Labels{1, 0, 0, 1, 0});
    ASSERT_EQ(flat.size(), 1u);
    EXPECT_EQ(flat[0].recall, 1.0);
    EXPECT_DOUBLE_EQ(flat[0].precision, 0.4);

    const auto curve = pr_curve(Scores{0.3, 0.7, 0.1, 0.9, 0.5}, Labels{1, 0, 0, 1, 1});
    EXPECT_DOUBLE_EQ(curve.back().precision, 0.6);
    EXPECT_EQ(curve.back().recall, 1.0);
    for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_GE(curve[k].recall, curve[k - 1].recall);
}

TEST(ConfidenceInterval, Examples) {
    const Interval same = confidence_interval(Scores{0.8, 0.8, 0.8});
    EXPECT_NEAR(same.mean, 0.8, 1e-15);
    EXPECT_LE(same.half_width(), 1e-15);

    const Interval pair = confidence_interval(Scores{0.88, 0.90});
    EXPECT_NEAR(pair.mean, 0.89, 1e-15);
    EXPECT_NEAR(pair.mean - pair.low, pair.high - pair.mean, 1e-15);
    const double sd = std::sqrt(2 * 0.01 * 0.01 / 1);
    EXPECT_NEAR(pair.half_width(), 12.706 * sd / std::sqrt(2.0), 1e-4);

    EXPECT_NEAR(student_t_quantile(0.975, 1), 12.706, 5e-4);
    EXPECT_NEAR(student_t_quantile(0.975, 9), 2.262, 5e-4);
    EXPECT_NEAR(student_t_quantile(0.95, 4), 2.132, 5e-4);

    EXPECT_THROW(confidence_interval(Scores{0.5}), ValidationError);
    EXPECT_THROW(confidence_interval(Scores{0.5, 0.6}, 1.0), ValidationError);
}

TEST(Folds, PartitionAndSeeds) {
    const auto a = fold_assignment(23, 10, 1);
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t f : a) ++sizes[f];
    EXPECT_EQ(sizes.size(), 10u);
    for (const auto& [f, n] : sizes) {
        EXPECT_LT(f, 10u);
        EXPECT_GE(n, 2u);
        EXPECT_LE(n, 3u);
    }
    EXPECT_EQ(a, fold_assignment(23, 10, 1));
    std::set<std::vector<std::size_t>> distinct;
    for (std::uint64_t run = 0; run < 10; ++run) distinct.insert(fold_assignment(23, 10, derive_seed(5, run)));
    EXPECT_EQ(distinct.size(), 10u);
    EXPECT_THROW(fold_assignment(5, 10, 0), ValidationError);
    EXPECT_THROW(fold_assignment(5, 1, 0), ValidationError);
    EXPECT_NE(derive_seed(1, 0, 1), derive_seed(1, 1, 0));
}

TEST(Crossval, SmallGridPartitionsComplexes) {
    const auto cs = fixture(9, 2);
    TrainConfig train;
    train.epochs = 1;
    train.batch_size = 8;
    CrossvalConfig cv;
    cv.runs = 2;
    cv.folds = 3;
    cv.seed = 4;
    const EvalReport report = crossvalidate(cs, paratope::testing::small_config(ModelKind::fast, 8), train, cv);
    ASSERT_EQ(report.folds.size(), 6u);
    std::set<std::vector<std::string>> splits;
    for (std::size_t run = 0; run < 2; ++run) {
        std::multiset<std::string> seen;
        std::vector<std::string> order;
        for (std::size_t f = 0; f < 3; ++f) {
            const FoldResult& r = report.folds[run * 3 + f];
            EXPECT_EQ(r.run, run);
            EXPECT_EQ(r.fold, f);
            EXPECT_EQ(r.test_complexes.size(), 3u);
            std::size_t residues = 0;
            for (const auto& id : r.test_complexes) {
                seen.insert(id);
                order.push_back(id);
                for (const auto& c : cs) {
                    if (c.id != id) continue;
                    for (const auto& cdr : c.cdrs) residues += cdr.size();
                }
            }
            EXPECT_EQ(r.test_residues, residues);
        }
        EXPECT_EQ(seen.size(), cs.size());
        for (const auto& c : cs) EXPECT_EQ(seen.count(c.id), 1u);
        splits.insert(order);
    }
    EXPECT_EQ(splits.size(), 2u);
    EXPECT_EQ(report.roc_auc.run_means.size(), 2u);
    EXPECT_TRUE(std::isfinite(report.roc_auc.interval.low));

    cv.jobs = 3;
    EXPECT_EQ(crossvalidate(cs, paratope::testing::small_config(ModelKind::fast, 8), train, cv).to_json(), report.to_json());

    cv.folds = 10;
    EXPECT_THROW(crossvalidate(cs, paratope::testing::small_config(ModelKind::fast, 8), train, cv), ValidationError);
}

TEST(Crossval, SummarySkipsSingleClassFolds) {
    EvalReport report;
    report.config.runs = 2;
    report.config.folds = 2;
    const double nan = std::nan("");
    report.folds = {{0, 0, {"a"}, 3, 0.8, 0.2, {}},
                    {0, 1, {"b"}, 3, nan, 0.0, {}},
                    {1, 0, {"b"}, 3, 0.6, 0.4, {}},
                    {1, 1, {"a"}, 3, 0.7, 0.1, {}}};
    summarize(report);
    ASSERT_EQ(report.roc_auc.run_means.size(), 2u);
    EXPECT_EQ(report.roc_auc.run_means[0], 0.8);
    EXPECT_NEAR(report.roc_auc.run_means[1], 0.65, 1e-15);
    EXPECT_NEAR(report.mcc.run_means[0], 0.1, 1e-15);
    EXPECT_NEAR(report.roc_auc.interval.mean, 0.725, 1e-15);

    report.folds.resize(2);
    report.config.runs = 1;
    summarize(report);
    EXPECT_TRUE(std::isnan(report.roc_auc.interval.low));
}

TEST(Crossval, ReportSerialisation) {
    EvalReport report;
    report.model = ModelKind::ag_fast;
    report.config.runs = 2;
    report.config.folds = 2;
    report.config.seed = 12345678901234ull;
    report.folds = {{0, 0, {"a", "b"}, 10, 0.1 + 0.2, 0.25, {{0.9, 1.0, 0.5}, {0.1, 0.5, 1.0}}},
                    {0, 1, {"c"}, 4, std::nan(""), 0.0, {}},
                    {1, 0, {"c"}, 4, 0.75, -0.5, {}},
                    {1, 1, {"a", "b"}, 10, 0.5, 0.0, {}}};
    summarize(report);
    const std::string text = report.to_json();
    const EvalReport back = EvalReport::from_json(text);
    EXPECT_EQ(back.to_json(), text);
    EXPECT_EQ(back.folds[0].roc_auc, 0.1 + 0.2);
    EXPECT_TRUE(std::isnan(back.folds[1].roc_auc));
    EXPECT_EQ(back.config.seed, report.config.seed);
    EXPECT_EQ(back.folds[0].pr, report.folds[0].pr);
    EXPECT_THROW(EvalReport::from_json("{\"model\": 3}"), ParseError);

    std::ostringstream folds, pr;
    write_fold_csv(folds, report);
    write_pr_csv(pr, report);
    const std::string fold_text = folds.str(), pr_text = pr.str();
    EXPECT_EQ(std::count(fold_text.begin(), fold_text.end(), '\n'), 5);
    EXPECT_EQ(fold_text.substr(0, fold_text.find('\n')), "run,fold,roc_auc,mcc,test_complexes,test_residues");
    EXPECT_EQ(std::count(pr_text.begin(), pr_text.end(), '\n'), 3);
}
