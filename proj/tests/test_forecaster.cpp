#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "flexpool/common.hpp"
#include "flexpool/dataset.hpp"
#include "flexpool/forecaster.hpp"

using namespace flexpool;

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

double tree_train_mse(const RegressionTree& tree, const std::vector<std::vector<double>>& cols,
                      const std::vector<double>& y) {
    const std::size_t n = y.size();
    double sse = 0;
    std::vector<double> x(cols.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < cols.size(); ++f) x[f] = cols[f][i];
        const double e = y[i] - tree.predict(x);
        sse += e * e;
    }
    return sse / static_cast<double>(n);
}

// Brute-force single-feature stump oracle: best midpoint threshold by SSE.
struct StumpOracle {
    double threshold = 0, left = 0, right = 0, sse = 0;
};

StumpOracle best_stump(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    StumpOracle best;
    best.sse = std::numeric_limits<double>::infinity();
    for (std::size_t cut = 1; cut < order.size(); ++cut) {
        if (xs[order[cut - 1]] == xs[order[cut]]) continue;
        std::vector<double> yl, yr;
        for (std::size_t i = 0; i < order.size(); ++i) (i < cut ? yl : yr).push_back(ys[order[i]]);
        const double ml = mean_of(yl), mr = mean_of(yr);
        double sse = 0;
        for (double v : yl) sse += (v - ml) * (v - ml);
        for (double v : yr) sse += (v - mr) * (v - mr);
        if (sse < best.sse) {
            best.sse = sse;
            best.threshold = 0.5 * (xs[order[cut - 1]] + xs[order[cut]]);
            best.left = ml;
            best.right = mr;
        }
    }
    return best;
}

// Walk a tree with every training row, counting rows per leaf.
void leaf_counts(const RegressionTree& tree, const std::vector<std::vector<double>>& cols,
                 std::vector<int>& counts) {
    counts.assign(tree.nodes.size(), 0);
    const std::size_t n = cols.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        int node = 0;
        while (tree.nodes[node].feature >= 0) {
            const auto& nd = tree.nodes[node];
            node = cols[nd.feature][i] <= nd.threshold ? nd.left : nd.right;
        }
        ++counts[node];
    }
}

std::vector<std::vector<double>> random_cols(std::size_t n_features, std::size_t n, std::uint64_t seed,
                                             double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<std::vector<double>> cols(n_features, std::vector<double>(n));
    for (auto& c : cols)
        for (auto& v : c) v = rng.uniform(lo, hi);
    return cols;
}

// ---------------------------------------------------------------------------
// Shared fixture: a tiny full-schema dataset backed by a synthetic context.

struct SchemaFixture {
    FeatureContext ctx;
    Dataset ds;
    std::vector<long> anchors;
};

SchemaFixture make_schema_fixture() {
    SchemaFixture fx;
    const long n = kMinHistorySteps + 96 + 30;  // anchors 675..704
    Rng rng(991);
    fx.ctx.s.resize(n);
    fx.ctx.y.resize(n);
    fx.ctx.T_ext.resize(n);
    fx.ctx.ghi.resize(n);
    for (long t = 0; t < n; ++t) {
        fx.ctx.s[t] = rng.uniform(0.0, 1.0) < 0.3 ? 1.0 : 0.0;
        fx.ctx.T_ext[t] = 8.0 + 6.0 * std::sin(0.01 * static_cast<double>(t)) + rng.uniform(-1.0, 1.0);
        fx.ctx.ghi[t] = std::max(0.0, 250.0 * std::sin(0.02 * static_cast<double>(t)));
        fx.ctx.y[t] = 40.0 + 10.0 * std::sin(0.03 * static_cast<double>(t)) - 12.0 * fx.ctx.s[t] +
                      0.5 * fx.ctx.T_ext[t];
    }
    fx.ctx.meta.assign(12, 0.0);
    for (int i = 0; i < 12; ++i) fx.ctx.meta[i] = 1.0 + i;
    fx.ctx.cal.start_dow = 4;
    fx.ctx.finalize();

    fx.ds.feature_names = feature_schema();
    fx.ds.x.assign(kNumFeatures, {});
    fx.ds.y.assign(96, {});
    for (long t = kMinHistorySteps; t + 96 < n; ++t) {
        fx.anchors.push_back(t);
        const auto x = make_features(fx.ctx, t);
        for (int f = 0; f < kNumFeatures; ++f) fx.ds.x[f].push_back(x[f]);
        for (int h = 0; h < 96; ++h) fx.ds.y[h].push_back(fx.ctx.y[t + 1 + h]);
        fx.ds.t_anchor.push_back(t);
        fx.ds.scenario_id.push_back(0);
    }
    return fx;
}

BoostParams tiny_params() {
    BoostParams p;
    p.learning_rate = 0.3;
    p.n_trees = 2;
    p.tree.max_depth = 2;
    p.tree.min_samples_leaf = 2;
    return p;
}

ForceOffSignal signal_from_series(const FeatureContext& ctx, long t) {
    ForceOffSignal sig;
    for (int i = 0; i < 96; ++i)
        if (ctx.s[t + 1 + i] > 0.5) sig.set_bit(i);
    return sig;
}

}  // namespace

TEST_CASE("fit_tree: constant target collapses to a single leaf") {
    auto cols = random_cols(3, 50, 11);
    std::vector<double> y(50, 3.25);
    TreeParams tp;
    const auto tree = fit_tree(cols, y, tp);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].feature == -1);
    CHECK(tree.nodes[0].value == doctest::Approx(3.25).epsilon(1e-15));
    CHECK(tree.predict({0.4, 0.2, 0.9}) == tree.nodes[0].value);
}

TEST_CASE("fit_tree: one-feature step function is recovered exactly") {
    std::vector<double> xs(20), ys(20);
    for (int i = 0; i < 20; ++i) {
        xs[i] = static_cast<double>(i);
        ys[i] = i <= 7 ? 2.0 : 12.0;
    }
    const auto oracle = best_stump(xs, ys);
    CHECK(oracle.threshold == 7.5);
    CHECK(oracle.sse == 0.0);

    TreeParams tp;
    tp.max_depth = 1;
    tp.min_samples_leaf = 1;
    const auto tree = fit_tree({xs}, ys, tp);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == oracle.threshold);
    CHECK(tree.predict({3.0}) == oracle.left);
    CHECK(tree.predict({15.0}) == oracle.right);
    CHECK(tree_train_mse(tree, {xs}, ys) == 0.0);
}

TEST_CASE("fit_tree: equal gains break toward lowest feature, then lowest threshold") {
    TreeParams tp;
    tp.max_depth = 1;
    tp.min_samples_leaf = 1;

    SUBCASE("duplicate columns pick feature 0") {
        std::vector<double> x = {0, 1, 2, 3};
        std::vector<double> y = {0, 0, 5, 5};
        const auto tree = fit_tree({x, x}, y, tp);
        REQUIRE(tree.nodes.size() == 3);
        CHECK(tree.nodes[0].feature == 0);
    }
    SUBCASE("tied thresholds pick the lowest") {
        // Gains tie between thresholds 0.5 and 2.5 (both 4/3 above parent score);
        // 1.5 is strictly worse.
        std::vector<double> x = {0, 1, 2, 3};
        std::vector<double> y = {0, 1, 1, 2};
        const auto tree = fit_tree({x}, y, tp);
        REQUIRE(tree.nodes.size() == 3);
        CHECK(tree.nodes[0].threshold == 0.5);
    }
}

TEST_CASE("fit_tree: bounded depth, min_samples_leaf honored, MSE never above variance") {
    Rng rng(21);
    const std::size_t n = 240;
    auto cols = random_cols(5, n, 22, -2.0, 2.0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 2.0 * cols[0][i] - std::abs(cols[1][i]) + 0.3 * cols[2][i] * cols[3][i] + rng.uniform(-0.2, 0.2);

    TreeParams tp;
    tp.max_depth = 4;
    tp.min_samples_leaf = 9;
    const auto tree = fit_tree(cols, y, tp);

    CHECK(tree_train_mse(tree, cols, y) <= variance_of(y) + 1e-12);

    std::vector<int> counts;
    leaf_counts(tree, cols, counts);
    int max_depth_seen = 0;
    std::vector<int> depth(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& nd = tree.nodes[i];
        if (nd.feature >= 0) {
            depth[nd.left] = depth[i] + 1;
            depth[nd.right] = depth[i] + 1;
        } else {
            CHECK(counts[i] >= tp.min_samples_leaf);
            max_depth_seen = std::max(max_depth_seen, depth[i]);
        }
    }
    CHECK(max_depth_seen <= tp.max_depth);

    SUBCASE("depth zero is the mean") {
        tp.max_depth = 0;
        const auto stump = fit_tree(cols, y, tp);
        REQUIRE(stump.nodes.size() == 1);
        CHECK(stump.nodes[0].value == doctest::Approx(mean_of(y)).epsilon(1e-14));
    }
}

TEST_CASE("fit_tree: histogram mode reproduces exact search on low-cardinality features") {
    Rng rng(31);
    const std::size_t n = 300;
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    for (auto& c : cols)
        for (auto& v : c) v = static_cast<double>(rng.uniform_int(0, 39)) / 4.0;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = cols[0][i] - 0.7 * cols[1][i] + 0.2 * cols[2][i] * cols[2][i] + rng.uniform(-0.05, 0.05);

    TreeParams exact;
    exact.max_depth = 4;
    exact.min_samples_leaf = 3;
    TreeParams hist = exact;
    hist.histogram = true;

    const auto te = fit_tree(cols, y, exact);
    const auto th = fit_tree(cols, y, hist);
    std::vector<double> x(3);
    for (std::size_t i = 0; i < n; ++i) {
        for (int f = 0; f < 3; ++f) x[f] = cols[f][i];
        CHECK(te.predict(x) == th.predict(x));
    }
}

TEST_CASE("fit_ensemble: base score, lr = 0 degeneracy, monotone training loss") {
    Rng rng(41);
    const std::size_t n = 160;
    auto cols = random_cols(4, n, 42);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * cols[0][i] + std::sin(5.0 * cols[1][i]) + rng.uniform(-0.1, 0.1);

    BoostParams p;
    p.learning_rate = 0.1;
    p.n_trees = 40;
    p.tree.max_depth = 3;
    p.tree.min_samples_leaf = 4;

    const auto ens = fit_ensemble(cols, y, p);
    CHECK(ens.base_score == doctest::Approx(mean_of(y)).epsilon(1e-14));
    REQUIRE(static_cast<int>(ens.train_mse.size()) == p.n_trees);
    CHECK(ens.train_mse.front() <= variance_of(y) + 1e-12);
    for (std::size_t r = 1; r < ens.train_mse.size(); ++r)
        CHECK(ens.train_mse[r] <= ens.train_mse[r - 1] + 1e-12);

    SUBCASE("learning rate zero predicts the training mean everywhere") {
        p.learning_rate = 0.0;
        p.n_trees = 3;
        const auto flat = fit_ensemble(cols, y, p);
        CHECK(flat.predict({0.1, 0.9, 0.5, 0.5}) == flat.base_score);
        CHECK(flat.predict({0.8, 0.2, 0.1, 0.9}) == flat.base_score);
    }
}

TEST_CASE("fit_ensemble: noiseless target is learned to R2 above 0.99") {
    const std::size_t n = 400;
    auto cols = random_cols(4, n, 52, -1.0, 1.0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 3.0 * cols[0][i] + std::sin(3.0 * cols[1][i]) + (cols[2][i] > 0.5 ? 2.0 : 0.0) +
               0.5 * cols[3][i] * cols[3][i];

    BoostParams p;
    p.learning_rate = 0.1;
    p.n_trees = 500;
    p.tree.max_depth = 3;
    p.tree.min_samples_leaf = 2;
    const auto ens = fit_ensemble(cols, y, p);

    double sse = 0;
    std::vector<double> x(4);
    for (std::size_t i = 0; i < n; ++i) {
        for (int f = 0; f < 4; ++f) x[f] = cols[f][i];
        const double e = y[i] - ens.predict(x);
        sse += e * e;
    }
    const double r2 = 1.0 - sse / (variance_of(y) * static_cast<double>(n));
    CHECK(r2 > 0.99);
}

TEST_CASE("fit_model: 96 ensembles, schema hash, determinism, batch consistency") {
    Dataset ds;
    ds.feature_names = {"f0", "f1", "f2", "f3", "f4", "f5"};
    const std::size_t n = 80;
    ds.x = random_cols(6, n, 61, -1.0, 1.0);
    ds.y.assign(96, std::vector<double>(n));
    for (int h = 0; h < 96; ++h)
        for (std::size_t i = 0; i < n; ++i)
            ds.y[h][i] = (h + 1) * 0.05 * ds.x[0][i] - ds.x[1][i] + 0.2 * ds.x[2][i] * ds.x[3][i];
    ds.t_anchor.assign(n, 700);
    ds.scenario_id.assign(n, 0);

    BoostParams p;
    p.learning_rate = 0.2;
    p.n_trees = 5;
    p.tree.max_depth = 2;
    p.tree.min_samples_leaf = 2;

    const auto m1 = fit_model(ds, p);
    const auto m2 = fit_model(ds, p, 2);
    REQUIRE(m1.per_step.size() == 96);
    CHECK(m1.schema_hash == names_hash(ds.feature_names));
    CHECK(m1.feature_names == ds.feature_names);
    for (const auto& ens : m1.per_step) CHECK(!ens.trees.empty());

    const auto batch = predict_dataset(m1, ds);
    REQUIRE(batch.size() == n);
    for (std::size_t i = 0; i < n; i += 7) {
        const auto p1 = m1.predict_row(ds.row(i));
        const auto p2 = m2.predict_row(ds.row(i));
        REQUIRE(p1.size() == 96);
        for (int h = 0; h < 96; ++h) {
            CHECK(p1[h] == p2[h]);       // thread-count independent
            CHECK(batch[i][h] == p1[h]); // batch == per-row
        }
    }

    SUBCASE("feature count mismatch throws at predict") {
        CHECK_THROWS(m1.predict_row(std::vector<double>(5, 0.0)));
    }
}

TEST_CASE("predict_with_override recomputes exactly the signal block") {
    auto fx = make_schema_fixture();
    const auto model = fit_model(fx.ds, tiny_params());
    const long t = fx.anchors[3];
    const auto x = make_features(fx.ctx, t);
    const auto base = model.predict_row(x);

    const auto s_before = fx.ctx.s;
    const ForceOffSignal same = signal_from_series(fx.ctx, t);

    SUBCASE("override with the embedded signal is a no-op") {
        const auto p = predict_with_override(model, fx.ctx, t, &same);
        for (int h = 0; h < 96; ++h) CHECK(p[h] == base[h]);
        CHECK(fx.ctx.s == s_before);
    }
    SUBCASE("null override keeps the embedded signal") {
        const auto p = predict_with_override(model, fx.ctx, t, nullptr);
        for (int h = 0; h < 96; ++h) CHECK(p[h] == base[h]);
    }
    SUBCASE("a different signal matches a from-scratch rebuild") {
        ForceOffSignal flipped = same;
        for (int i = 20; i < 44; ++i) flipped.words[i >> 6] ^= 1ULL << (i & 63);

        FeatureContext alt = fx.ctx;
        for (int i = 0; i < 96; ++i) alt.s[t + 1 + i] = flipped.bit(i) ? 1.0 : 0.0;
        alt.finalize();
        const auto expect = model.predict_row(make_features(alt, t));

        const auto p = predict_with_override(model, fx.ctx, t, &flipped);
        for (int h = 0; h < 96; ++h) CHECK(p[h] == expect[h]);
        CHECK(fx.ctx.s == s_before);  // restored afterwards
    }
}

TEST_CASE("specialize: partial evaluation matches the full model") {
    Dataset ds;
    ds.feature_names = {"a", "b", "c", "d", "e", "f"};
    const std::size_t n = 120;
    ds.x = random_cols(6, n, 71, -1.0, 1.0);
    ds.y.assign(96, std::vector<double>(n));
    for (int h = 0; h < 96; ++h)
        for (std::size_t i = 0; i < n; ++i)
            ds.y[h][i] = (h + 1) * 0.02 * (ds.x[0][i] - 2.0 * ds.x[1][i]) + 3.0 * ds.x[2][i] * ds.x[3][i] +
                         ds.x[4][i];
    ds.t_anchor.assign(n, 700);
    ds.scenario_id.assign(n, 0);

    BoostParams p;
    p.learning_rate = 0.2;
    p.n_trees = 20;
    p.tree.max_depth = 3;
    p.tree.min_samples_leaf = 3;
    const auto model = fit_model(ds, p);

    std::vector<double> x_fixed = ds.row(5);
    const auto spec = specialize(model, x_fixed, 2);
    REQUIRE(spec.offsets.size() == 96);
    REQUIRE(spec.trees.size() == 96);

    Rng rng(72);
    for (int trial = 0; trial < 15; ++trial) {
        auto x = x_fixed;
        x[0] = rng.uniform(-1.0, 1.0);
        x[1] = rng.uniform(-1.0, 1.0);
        const auto full = model.predict_row(x);
        const auto fast = spec.predict(x);
        for (int h = 0; h < 96; ++h) CHECK(fast[h] == doctest::Approx(full[h]).epsilon(1e-12));
    }
    // Specialization may only shrink the per-step tree lists.
    for (int h = 0; h < 96; ++h) CHECK(spec.trees[h].size() <= model.per_step[h].trees.size());

    SUBCASE("a constant model folds entirely into offsets") {
        BoostParams flat = p;
        flat.tree.max_depth = 0;
        flat.n_trees = 4;
        const auto cm = fit_model(ds, flat);
        const auto cs = specialize(cm, x_fixed, 2);
        for (int h = 0; h < 96; ++h) {
            CHECK(cs.trees[h].empty());
            CHECK(cs.offsets[h] == doctest::Approx(cm.predict_row(x_fixed)[h]).epsilon(1e-13));
        }
    }
}

TEST_CASE("energy-aware stage: imbalance features and frozen stage one") {
    auto fx = make_schema_fixture();
    const auto p = tiny_params();
    const auto stage1 = fit_model(fx.ds, p);

    SUBCASE("uncontrolled rows have exactly zero imbalance features") {
        auto x = fx.ds.row(2);
        std::fill(x.begin(), x.begin() + kNumSignalFeatures, 0.0);
        const auto imb = imbalance_features(stage1, x);
        REQUIRE(imb.size() == 96);
        for (double v : imb) CHECK(v == 0.0);
    }
    SUBCASE("controlled rows move the imbalance away from zero") {
        const auto imb = imbalance_features(stage1, fx.ds.row(2));
        REQUIRE(imb.size() == 96);
        double norm = 0;
        for (double v : imb) norm += std::abs(v);
        CHECK(norm > 0.0);
    }
    SUBCASE("prefit stage one is reused frozen; stage two widens the schema") {
        const auto ea = fit_energy_aware(fx.ds, p, stage1);
        for (std::size_t i = 0; i < fx.ds.n_rows(); i += 5) {
            const auto a = ea.stage1.predict_row(fx.ds.row(i));
            const auto b = stage1.predict_row(fx.ds.row(i));
            for (int h = 0; h < 96; ++h) CHECK(a[h] == b[h]);
        }
        REQUIRE(ea.stage2.feature_names.size() == static_cast<std::size_t>(kNumFeatures + 96));
        CHECK(ea.stage2.feature_names[kNumFeatures] == "imb_1");
        CHECK(ea.stage2.feature_names.back() == "imb_96");
        CHECK(ea.stage2.schema_hash == names_hash(ea.stage2.feature_names));

        const auto yhat = predict_energy_aware(ea, fx.ds.row(1));
        REQUIRE(yhat.size() == 96);
        for (double v : yhat) CHECK(std::isfinite(v));

        // The one-argument form trains stage one itself, identically.
        const auto ea2 = fit_energy_aware(fx.ds, p);
        const auto ref = predict_energy_aware(ea2, fx.ds.row(1));
        for (int h = 0; h < 96; ++h) CHECK(ref[h] == yhat[h]);
    }
}

TEST_CASE("nmae: hand-computed values and the zero-norm guard") {
    const std::vector<double> y(96, 1.0);
    CHECK(nmae(y, y) == 0.0);
    CHECK(nmae(y, std::vector<double>(96, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> wobble(96);
    for (int i = 0; i < 96; ++i) wobble[i] = 1.0 + (i % 2 == 0 ? 0.1 : -0.1);
    CHECK(nmae(y, wobble) == doctest::Approx(0.1).epsilon(1e-12));

    CHECK_THROWS(nmae(std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)));
    CHECK_THROWS(nmae(y, std::vector<double>(95, 1.0)));  // length mismatch
}

TEST_CASE("energy_imbalance: hand-computed ratios") {
    std::vector<double> y(10, 1.0);          // sums to 10
    std::vector<double> ys(10, 1.1);         // 11
    std::vector<double> y0(10, 1.05);        // 10.5
    const auto ei = energy_imbalance(y, ys, y0);
    CHECK(ei.delta_rel_E == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(ei.delta_rel_noctrl_E == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS(energy_imbalance(std::vector<double>(4, 0.0), ys, y0));
}

TEST_CASE("tune: deterministic seeded search within the documented ranges") {
    Dataset ds;
    ds.feature_names = {"f0", "f1", "f2", "f3", "f4"};
    const std::size_t n = 60;
    ds.x = random_cols(5, n, 81, 0.0, 1.0);
    ds.y.assign(96, std::vector<double>(n));
    Rng rng(82);
    for (int h = 0; h < 96; ++h)
        for (std::size_t i = 0; i < n; ++i)
            ds.y[h][i] = 5.0 + 2.0 * ds.x[0][i] - ds.x[1][i] + rng.uniform(-0.05, 0.05);
    ds.t_anchor.assign(n, 700);
    ds.scenario_id.assign(n, 0);

    TreeParams tp;
    tp.max_depth = 2;
    tp.min_samples_leaf = 2;

    const auto r1 = tune(ds, 3, 3, 777, tp);
    const auto r2 = tune(ds, 3, 3, 777, tp);
    CHECK(r1.learning_rate == r2.learning_rate);
    CHECK(r1.n_trees == r2.n_trees);
    CHECK(r1.cv_score == r2.cv_score);
    CHECK(r1.learning_rate >= 0.01);
    CHECK(r1.learning_rate <= 0.3);
    CHECK(r1.n_trees >= 50);
    CHECK(r1.n_trees <= 1000);
    CHECK(std::isfinite(r1.cv_score));
    CHECK(r1.cv_score >= 0.0);

    const auto single = tune(ds, 1, 3, 778, tp);
    CHECK(single.n_trees >= 50);
}

TEST_CASE("JSON persistence: bit-exact round trips and format guard") {
    auto fx = make_schema_fixture();
    const auto model = fit_model(fx.ds, tiny_params());
    const std::string path = "/tmp/flexpool_test_model.json";
    save_model_json(path, model);
    const auto loaded = load_model_json(path);

    CHECK(loaded.schema_hash == model.schema_hash);
    CHECK(loaded.feature_names == model.feature_names);
    REQUIRE(loaded.per_step.size() == 96);
    Rng rng(91);
    for (int trial = 0; trial < 6; ++trial) {
        auto x = fx.ds.row(trial % fx.ds.n_rows());
        for (auto& v : x) v += rng.uniform(-0.01, 0.01);
        const auto a = model.predict_row(x);
        const auto b = loaded.predict_row(x);
        for (int h = 0; h < 96; ++h) CHECK(a[h] == b[h]);
    }

    SUBCASE("energy-aware bundle round-trips") {
        const auto ea = fit_energy_aware(fx.ds, tiny_params());
        const std::string ep = "/tmp/flexpool_test_ea.json";
        save_energy_aware_json(ep, ea);
        const auto lea = load_energy_aware_json(ep);
        const auto a = predict_energy_aware(ea, fx.ds.row(0));
        const auto b = predict_energy_aware(lea, fx.ds.row(0));
        for (int h = 0; h < 96; ++h) CHECK(a[h] == b[h]);
    }
    SUBCASE("wrong format string is rejected") {
        std::FILE* f = std::fopen("/tmp/flexpool_bad_model.json", "w");
        REQUIRE(f);
        std::fputs("{\"format\": \"not-a-model\", \"ensembles\": []}", f);
        std::fclose(f);
        CHECK_THROWS(load_model_json("/tmp/flexpool_bad_model.json"));
    }
}

TEST_CASE("parameter validation") {
    TreeParams tp;
    tp.max_depth = -1;
    CHECK_THROWS(tp.validate());
    tp = {};
    tp.min_samples_leaf = 0;
    CHECK_THROWS(tp.validate());
    tp = {};
    tp.n_bins = 1;
    CHECK_THROWS(tp.validate());
    tp = {};
    tp.n_bins = 300;
    CHECK_THROWS(tp.validate());

    BoostParams bp;
    bp.learning_rate = -0.1;
    CHECK_THROWS(bp.validate());
    bp = {};
    bp.learning_rate = 1.5;
    CHECK_THROWS(bp.validate());
    bp = {};
    bp.n_trees = -1;
    CHECK_THROWS(bp.validate());
    bp = {};
    bp.colsample = 0.0;
    CHECK_THROWS(bp.validate());
    bp = {};
    bp.colsample = 1.2;
    CHECK_THROWS(bp.validate());
}
