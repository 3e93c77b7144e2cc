#include <doctest.h>

#include <cmath>
#include <vector>

#include "abkb/errors.hpp"
#include "abkb/fitts.hpp"
#include "abkb/rng.hpp"

using namespace abkb;

namespace {

constexpr double kW = 130.0;

MovementSample sample_at_id(double id, double mt, double angle = 0.0, int demanded_bin = 0) {
    MovementSample s;
    s.distance = kW * (std::exp2(id) - 1.0);
    if (s.distance > 0.0) s.angle = angle;
    s.movement_time = mt;
    s.demanded_bin = demanded_bin;
    s.distance_class = static_cast<int>(std::lround(s.distance / kW));
    return s;
}

// Independent least squares and residual SD for the oracle.
struct Ols {
    double a, b, r2, sd;
    std::vector<double> residuals;
};

Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double a = (sy - b * sx) / n;
    double ss_res = 0, ss_tot = 0;
    std::vector<double> res;
    for (std::size_t i = 0; i < x.size(); ++i) {
        res.push_back(y[i] - a - b * x[i]);
        ss_res += res.back() * res.back();
        ss_tot += (y[i] - sy / n) * (y[i] - sy / n);
    }
    return {a, b, 1.0 - ss_res / ss_tot, std::sqrt(ss_res / (n - 2.0)), res};
}

}  // namespace

TEST_CASE("index_of_difficulty examples") {
    CHECK(index_of_difficulty(0, 130) == 0.0);
    CHECK(index_of_difficulty(130, 130) == doctest::Approx(1.0));
    CHECK(index_of_difficulty(390, 130) == doctest::Approx(2.0));
    CHECK_THROWS_AS(index_of_difficulty(10, 0), InvalidArgument);
    CHECK_THROWS_AS(index_of_difficulty(10, -1), InvalidArgument);
}

TEST_CASE("fit_bins: noiseless line is recovered exactly") {
    std::vector<MovementSample> samples;
    for (double id : {0.0, 1.0, 2.0, 3.0, 1.0, 2.0}) samples.push_back(sample_at_id(id, 0.5 + 0.2 * id));
    const auto model = fit_bins(samples, kW);
    const auto& b = model.bin(0);
    CHECK(b.fitted);
    CHECK(b.a == doctest::Approx(0.5));
    CHECK(b.b == doctest::Approx(0.2));
    CHECK(b.r_squared == doctest::Approx(1.0));
    CHECK(b.n_samples == 6);
    CHECK_FALSE(model.bin(3).fitted);
}

TEST_CASE("fit_bins: a single distinct ID leaves the bin unfitted") {
    std::vector<MovementSample> samples;
    for (double mt : {0.4, 0.5, 0.6}) samples.push_back(sample_at_id(1.0, mt, 90.0));
    samples.push_back(sample_at_id(1.0, 0.3, 0.0));
    samples.push_back(sample_at_id(2.0, 0.6, 0.0));
    const auto model = fit_bins(samples, kW);
    CHECK_FALSE(model.bin(4).fitted);
    CHECK(model.bin(4).n_samples == 3);
    CHECK(model.bin(0).fitted);
}

TEST_CASE("fit_bins: empty input is rejected") {
    std::vector<MovementSample> none;
    CHECK_THROWS_AS(fit_bins(none, kW), InvalidArgument);
}

TEST_CASE("fit_bins: zero-distance samples anchor their demanded bin") {
    std::vector<MovementSample> samples;
    samples.push_back(sample_at_id(0.0, 0.5, 0.0, 7));
    samples.push_back(sample_at_id(0.0, 0.5, 0.0, 7));
    samples.push_back(sample_at_id(1.0, 0.7, 7 * 22.5));
    const auto model = fit_bins(samples, kW);
    CHECK(model.bin(7).n_samples == 3);
    CHECK(model.bin(7).a == doctest::Approx(0.5));
    CHECK(model.bin(7).b == doctest::Approx(0.2));
}

TEST_CASE("fit_bins: outlier fixture of 12 samples flags exactly one") {
    // IDs 0, 1 and 2, four samples each, on MT = 0.5 + 0.2 ID; one sample at
    // the mean ID is pushed up. Its leverage is 1/12, so after refitting its
    // residual is 11/12 of the push and the others are 1/12 of it.
    std::vector<double> x, y;
    for (double id : {0.0, 1.0, 2.0})
        for (int i = 0; i < 4; ++i) {
            x.push_back(id);
            y.push_back(0.5 + 0.2 * id);
        }
    y[4] += 0.3;
    const Ols oracle = ols(x, y);
    int expected = 0;
    for (double r : oracle.residuals) expected += std::abs(r) > 3.0 * oracle.sd ? 1 : 0;
    REQUIRE(expected == 1);
    CHECK(std::abs(oracle.residuals[4]) / oracle.sd == doctest::Approx(11.0 / 12.0 / std::sqrt(132.0 / 1440.0)));

    std::vector<MovementSample> samples;
    for (std::size_t i = 0; i < x.size(); ++i) samples.push_back(sample_at_id(x[i], y[i]));
    const auto report = fit_bins_detailed(samples, kW);
    CHECK(report.model.bin(0).outlier_count == 1);
    REQUIRE(report.outliers.size() == 1);
    CHECK(report.outliers[0] == 4);
    for (int k = 1; k < kAngleBins; ++k) CHECK(report.model.bin(k).outlier_count == 0);
    // flagged, not removed
    CHECK(report.model.bin(0).n_samples == 12);
    CHECK(report.model.bin(0).a == doctest::Approx(oracle.a));
}

TEST_CASE("predict_mt examples") {
    const auto generic = generic_model(kW);
    CHECK(predict_mt(generic, 37.0, 130.0) == doctest::Approx(0.127 + 1.0 / 4.9));
    CHECK(predict_mt(generic, 37.0, 130.0) == doctest::Approx(0.3311).epsilon(1e-4));
    CHECK(predict_mt(generic, std::nullopt, 0.0) == doctest::Approx(0.127));
    CHECK_THROWS_AS(predict_mt(generic, std::nullopt, 130.0), InvalidArgument);
    CHECK_THROWS_AS(predict_mt(generic, 0.0, -1.0), InvalidArgument);

    std::array<FittsBinModel, kAngleBins> bins{};
    bins[0] = {0.2, 0.1, 1.0, 10, 0, true, false};
    bins[4] = {0.4, 0.3, 1.0, 10, 0, true, false};
    const DirectionalFittsModel two(bins, kW);
    CHECK(predict_mt(two, 1.0, 130.0) == doctest::Approx(0.3));
    CHECK(predict_mt(two, 89.0, 130.0) == doctest::Approx(0.7));
    // unfitted bins use the mean of the fitted ones
    CHECK(predict_mt(two, 180.0, 130.0) == doctest::Approx(0.3 + 0.2));
    CHECK(two.mean_intercept() == doctest::Approx(0.3));
    CHECK(predict_mt(two, std::nullopt, 0.0) == doctest::Approx(0.3));
}

TEST_CASE("predict_mt clamps negative predictions at zero") {
    std::array<FittsBinModel, kAngleBins> bins{};
    for (auto& b : bins) b = {0.1, -0.5, 0.5, 10, 0, true, false};
    const DirectionalFittsModel m(bins, kW);
    CHECK(predict_mt(m, 0.0, 1000.0) == 0.0);
}

TEST_CASE("generic_model examples") {
    const auto m = generic_model(130.0);
    CHECK(m.bin(7).a == 0.127);
    for (int k = 0; k < kAngleBins; ++k) {
        CHECK(m.bin(k).b == 1.0 / 4.9);
        CHECK(m.bin(k).synthetic);
        CHECK(m.bin(k).r_squared == 1.0);
    }
    CHECK(m.mean_intercept() == doctest::Approx(0.127));
}

TEST_CASE("property: generic predictions do not depend on angle") {
    const auto m = generic_model(kW);
    for (double d : {50.0, 130.0, 400.0, 1000.0}) {
        const double ref = predict_mt(m, 0.0, d);
        for (double a = 0.0; a < 360.0; a += 7.3) CHECK(predict_mt(m, a, d) == ref);
    }
}

TEST_CASE("property: recovery of known constants under noise") {
    Rng rng = make_rng(2024);
    std::array<double, kAngleBins> a{}, b{};
    std::vector<MovementSample> samples;
    for (int bin = 0; bin < kAngleBins; ++bin) {
        a[static_cast<std::size_t>(bin)] = 0.2 + 0.6 * uniform_unit(rng);
        b[static_cast<std::size_t>(bin)] = 0.2 + 0.6 * uniform_unit(rng);
        for (int i = 0; i < 25; ++i) {
            const int k = i % 9;
            const double id = std::log2(k + 1.0);
            const double mt = a[static_cast<std::size_t>(bin)] + b[static_cast<std::size_t>(bin)] * id +
                              0.05 * standard_normal(rng);
            samples.push_back(sample_at_id(id, std::max(mt, 1e-3), bin * 22.5, bin));
        }
    }
    const auto model = fit_bins(samples, kW);
    for (int bin = 0; bin < kAngleBins; ++bin) {
        CHECK(std::abs(model.bin(bin).a - a[static_cast<std::size_t>(bin)]) <= 0.05);
        CHECK(std::abs(model.bin(bin).b - b[static_cast<std::size_t>(bin)]) <= 0.05);
        CHECK(model.bin(bin).r_squared >= 0.9);
    }
}

TEST_CASE("property: R squared matches an independent two-pass computation") {
    Rng rng = make_rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x, y;
        std::vector<MovementSample> samples;
        const int n = 3 + static_cast<int>(uniform_index(rng, 20));
        for (int i = 0; i < n; ++i) {
            const double id = std::log2(1.0 + static_cast<double>(uniform_index(rng, 9)));
            const double mt = 0.3 + 0.4 * id + 0.3 * uniform_unit(rng);
            x.push_back(id);
            y.push_back(mt);
            samples.push_back(sample_at_id(id, mt));
        }
        const auto model = fit_bins(samples, kW);
        if (!model.bin(0).fitted) continue;
        const Ols oracle = ols(x, y);
        CHECK(std::abs(model.bin(0).r_squared - std::clamp(oracle.r2, 0.0, 1.0)) <= 1e-12);
    }
}

TEST_CASE("property: predictions are monotone in distance for b >= 0") {
    const auto m = anisotropic_model(kW, 0.83, 0.5, 2.0);
    for (double angle = 0.0; angle < 360.0; angle += 11.0) {
        double prev = 0.0;
        for (double d = 0.0; d < 1200.0; d += 25.0) {
            const double mt = predict_mt(m, d > 0 ? std::optional<double>(angle) : std::nullopt, d);
            CHECK(mt >= prev - 1e-15);
            prev = mt;
        }
    }
}

TEST_CASE("anisotropic model doubles the horizontal slope") {
    const auto m = anisotropic_model(kW, 0.83, 0.5, 2.0);
    CHECK(m.bin(0).b == doctest::Approx(1.0));
    CHECK(m.bin(8).b == doctest::Approx(1.0));
    CHECK(m.bin(4).b == doctest::Approx(0.5));
    CHECK(m.bin(12).b == doctest::Approx(0.5));
    CHECK(m.mean_intercept() == doctest::Approx(0.83));
}

TEST_CASE("model JSON round trip is exact") {
    std::vector<MovementSample> samples;
    Rng rng = make_rng(5);
    for (int i = 0; i < 60; ++i)
        samples.push_back(sample_at_id(std::log2(1.0 + static_cast<double>(i % 5)), 0.3 + uniform_unit(rng), (i % 16) * 22.5,
                                       i % 16));
    const auto model = fit_bins(samples, kW);
    const auto doc = model_to_json(model);
    CHECK(doc.at("bins").size() == 16);
    CHECK(doc.contains("mean_intercept_s"));
    const auto back = model_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back == model);
    CHECK(model_to_json(back).dump() == doc.dump());
    auto bad = doc;
    bad["mean_intercept_s"] = 42.0;
    CHECK_THROWS_AS(model_from_json(bad), InvalidArgument);
    bad = doc;
    bad["bins"].erase(3);
    CHECK_THROWS_AS(model_from_json(bad), InvalidArgument);
}
