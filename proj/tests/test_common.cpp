#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>

#include "flexpool/common.hpp"

using namespace flexpool;

TEST_SUITE("common") {

TEST_CASE("splitmix64 matches the reference vectors") {
    CHECK(splitmix64(0) == 16294208416658607535ULL);
    CHECK(splitmix64(1234567) == 6457827717110365317ULL);
    CHECK(splitmix64(0xdeadbeefULL) == 5395234354446855067ULL);
}

TEST_CASE("fnv1a matches the published test vectors") {
    CHECK(fnv1a("") == 14695981039346656037ULL);
    CHECK(fnv1a("a") == 12638187200555641996ULL);       // 0xaf63dc4c8601ec8c
    CHECK(fnv1a("foobar") == 9625390261332436968ULL);   // 0x85944171f73967e8
}

TEST_CASE("derive_seed separates stages and follows the definition") {
    CHECK(derive_seed(42, "weather") == 15917882588254462900ULL);
    CHECK(derive_seed(42, "weather") == splitmix64(42ULL ^ fnv1a("weather")));
    CHECK(derive_seed(42, "weather") != derive_seed(42, "fleet"));
    CHECK(derive_seed(42, "weather") != derive_seed(43, "weather"));
}

TEST_CASE("rng reproducibility and bounds") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double xa = a.uniform(), xb = b.uniform(), xc = c.uniform();
        all_equal = all_equal && xa == xb;
        any_diff = any_diff || xa != xc;
        CHECK(xa >= 0.0);
        CHECK(xa < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng uniform(a,b), loguniform, uniform_int ranges") {
    Rng r(7);
    for (int i = 0; i < 2000; ++i) {
        const double u = r.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
        const double lg = r.loguniform(50.0, 200.0);
        CHECK(lg >= 50.0);
        CHECK(lg < 200.0 * (1 + 1e-12));
    }
    CHECK_THROWS(r.loguniform(-1.0, 2.0));
    CHECK_THROWS(r.uniform_int(3, 2));

    std::set<std::int64_t> seen;
    for (int i = 0; i < 3000; ++i) {
        const std::int64_t k = r.uniform_int(1, 5);
        CHECK(k >= 1);
        CHECK(k <= 5);
        seen.insert(k);
    }
    CHECK(seen.size() == 5);  // all values reachable, endpoints included
}

TEST_CASE("rng normal moments") {
    Rng r(99);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    const double v = s2 / n - m * m;
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("loguniform is uniform in log space") {
    Rng r(5);
    const int n = 100000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += std::log(r.loguniform(50.0, 200.0));
    const double expected = 0.5 * (std::log(50.0) + std::log(200.0));
    CHECK(std::abs(s / n - expected) < 0.01);
}

TEST_CASE("mean/variance/quantile against straightforward oracles") {
    Rng r(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 1 + static_cast<int>(r.uniform_int(0, 50));
        std::vector<double> v(n);
        for (double& x : v) x = r.uniform(-10, 10);

        double s = 0;
        for (double x : v) s += x;
        const double m_ref = s / n;
        CHECK(mean(v) == doctest::Approx(m_ref).epsilon(1e-12));

        double ss = 0;
        for (double x : v) ss += (x - m_ref) * (x - m_ref);
        CHECK(variance(v) == doctest::Approx(ss / n).epsilon(1e-12));

        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        CHECK(quantile(v, 0.0) == sorted.front());
        CHECK(quantile(v, 1.0) == sorted.back());
        for (double q : {0.1, 0.25, 0.5, 0.9}) {
            const double h = (n - 1) * q;
            const int lo = static_cast<int>(std::floor(h));
            const int hi = static_cast<int>(std::ceil(h));
            const double ref = sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo);
            CHECK(quantile(v, q) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    CHECK_THROWS(mean({}));
    CHECK_THROWS(quantile({}, 0.5));
    CHECK_THROWS(quantile({1.0}, 1.5));
    CHECK(quantile({3.0}, 0.7) == 3.0);
}

TEST_CASE("calendar arithmetic") {
    CHECK(Calendar::month_of_day(0) == 0);
    CHECK(Calendar::month_of_day(30) == 0);    // Jan 31
    CHECK(Calendar::month_of_day(31) == 1);    // Feb 1
    CHECK(Calendar::month_of_day(58) == 1);    // Feb 28
    CHECK(Calendar::month_of_day(59) == 2);    // Mar 1
    CHECK(Calendar::month_of_day(364) == 11);  // Dec 31
    CHECK(Calendar::month_of_day(365) == 0);   // wraps to a new year

    int total = 0;
    for (int m = 0; m < 12; ++m) total += Calendar::month_days[m];
    CHECK(total == 365);

    Calendar cal;  // day 0 is a Sunday
    CHECK(cal.dow(0) == 0);
    CHECK(cal.dow(6) == 6);
    CHECK(cal.dow(7) == 0);

    CHECK(Calendar::day_of_step(0) == 0);
    CHECK(Calendar::day_of_step(95) == 0);
    CHECK(Calendar::day_of_step(96) == 1);
    CHECK(Calendar::step_in_day(96 * 3 + 17) == 17);
    CHECK(Calendar::hour_of_step(5) == 1);
    CHECK(Calendar::minute_of_day(5) == 75);
    CHECK(kGamma == 0.25);
}

TEST_CASE("csv round trip") {
    CsvTable t;
    t.header = {"a", "b_long_name", "c"};
    t.columns = {{1.0, -2.5, 3e-17}, {4.0, 5.0, 123456789.123456789}, {0.0, -0.0, 7.25}};
    const std::string path = "/tmp/flexpool_test_roundtrip.csv";
    write_csv(path, t);
    const CsvTable u = read_csv(path);
    REQUIRE(u.header == t.header);
    REQUIRE(u.n_rows() == 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 3; ++i) CHECK(u.columns[c][i] == t.columns[c][i]);
    CHECK(u.col("b_long_name")[2] == 123456789.123456789);
    CHECK_THROWS(u.col("missing"));
    std::remove(path.c_str());
}

TEST_CASE("parallel_for covers every index exactly once") {
    for (int threads : {1, 4}) {
        const std::size_t n = 1000;
        std::vector<std::atomic<int>> hits(n);
        for (auto& h : hits) h = 0;
        parallel_for(n, [&](std::size_t i) { hits[i]++; }, threads);
        for (std::size_t i = 0; i < n; ++i) CHECK(hits[i] == 1);
    }
    parallel_for(0, [](std::size_t) { REQUIRE(false); }, 4);  // no-op on empty range
}

}  // TEST_SUITE
