#include "abkb/fitts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "abkb/errors.hpp"

namespace abkb {

DirectionalFittsModel::DirectionalFittsModel(std::array<FittsBinModel, kAngleBins> bins,
                                             double key_width)
    : bins_(bins), key_width_(key_width) {
    if (!(key_width > 0.0)) throw InvalidArgument("model key width must be positive");
    double sum_a = 0.0;
    double sum_b = 0.0;
    int fitted = 0;
    for (const auto& bin : bins_) {
        if (!bin.fitted) continue;
        sum_a += bin.a;
        sum_b += bin.b;
        ++fitted;
    }
    if (fitted > 0) {
        fallback_a_ = sum_a / fitted;
        fallback_b_ = sum_b / fitted;
    }
    double total = 0.0;
    for (const auto& bin : bins_) total += bin.fitted ? bin.a : fallback_a_;
    mean_intercept_ = total / kAngleBins;
}

bool DirectionalFittsModel::all_fitted() const noexcept {
    return std::all_of(bins_.begin(), bins_.end(), [](const auto& b) { return b.fitted; });
}

bool DirectionalFittsModel::any_fitted() const noexcept {
    return std::any_of(bins_.begin(), bins_.end(), [](const auto& b) { return b.fitted; });
}

std::pair<double, double> DirectionalFittsModel::constants(int bin) const {
    const FittsBinModel& m = bins_.at(static_cast<std::size_t>(bin));
    if (m.fitted) return {m.a, m.b};
    if (!any_fitted()) throw InvalidState("model has no fitted bins");
    return {fallback_a_, fallback_b_};
}

double index_of_difficulty(double distance, double key_width) {
    if (!(key_width > 0.0)) throw InvalidArgument("key width must be positive");
    if (distance < 0.0) throw InvalidArgument("distance must be nonnegative");
    return std::log2(distance / key_width + 1.0);
}

FitReport fit_bins_detailed(std::span<const MovementSample> samples, double key_width) {
    if (samples.empty()) throw InvalidArgument("cannot fit a model without samples");
    if (!(key_width > 0.0)) throw InvalidArgument("key width must be positive");

    std::array<std::vector<std::size_t>, kAngleBins> members;
    for (std::size_t i = 0; i < samples.size(); ++i)
        members[static_cast<std::size_t>(samples[i].bin())].push_back(i);

    std::array<FittsBinModel, kAngleBins> bins{};
    std::vector<std::size_t> outliers;
    for (int k = 0; k < kAngleBins; ++k) {
        const auto& idx = members[static_cast<std::size_t>(k)];
        FittsBinModel& out = bins[static_cast<std::size_t>(k)];
        out.n_samples = static_cast<int>(idx.size());
        if (idx.size() < 2) continue;

        std::vector<double> x(idx.size());
        std::vector<double> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            x[i] = index_of_difficulty(samples[idx[i]].distance, key_width);
            y[i] = samples[idx[i]].movement_time;
        }
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) continue;

        const double n = static_cast<double>(x.size());
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0.0;
        double sxy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        out.b = sxy / sxx;
        out.a = my - out.b * mx;

        std::vector<double> residual(x.size());
        double ss_res = 0.0;
        double ss_tot = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            residual[i] = y[i] - (out.a + out.b * x[i]);
            ss_res += residual[i] * residual[i];
            ss_tot += (y[i] - my) * (y[i] - my);
        }
        out.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
        out.fitted = true;

        // Residual standard error (n - 2 degrees of freedom).
        if (x.size() > 2) {
            const double sd = std::sqrt(ss_res / (n - 2.0));
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (sd > 0.0 && std::abs(residual[i]) > 3.0 * sd) {
                    ++out.outlier_count;
                    outliers.push_back(idx[i]);
                }
            }
        }
    }
    std::sort(outliers.begin(), outliers.end());
    return {DirectionalFittsModel(bins, key_width), std::move(outliers)};
}

DirectionalFittsModel fit_bins(std::span<const MovementSample> samples, double key_width) {
    return fit_bins_detailed(samples, key_width).model;
}

double predict_mt(const DirectionalFittsModel& model, std::optional<double> angle,
                  double distance) {
    if (distance < 0.0) throw InvalidArgument("distance must be nonnegative");
    if (distance == 0.0) return std::max(0.0, model.mean_intercept());
    if (!angle) throw InvalidArgument("movement direction is required for a nonzero distance");
    // Unfitted bins fall back to the across-bin mean; callers that build whole
    // matrices report that once (see build_cost_matrix).
    const auto [a, b] = model.constants(angle_bin(*angle));
    return std::max(0.0, a + b * index_of_difficulty(distance, model.key_width()));
}

DirectionalFittsModel generic_model(double key_width) {
    std::array<FittsBinModel, kAngleBins> bins{};
    for (auto& bin : bins) {
        bin.a = kGenericIntercept;
        bin.b = kGenericSlope;
        bin.r_squared = 1.0;
        bin.fitted = true;
        bin.synthetic = true;
    }
    return {bins, key_width};
}

DirectionalFittsModel anisotropic_model(double key_width, double a, double b_vertical,
                                        double horizontal_ratio) {
    std::array<FittsBinModel, kAngleBins> bins{};
    for (int k = 0; k < kAngleBins; ++k) {
        const double theta = k * kBinWidthDeg * std::numbers::pi / 180.0;
        const double c = std::cos(theta);
        auto& bin = bins[static_cast<std::size_t>(k)];
        bin.a = a;
        bin.b = b_vertical * (1.0 + (horizontal_ratio - 1.0) * c * c);
        bin.r_squared = 1.0;
        bin.fitted = true;
        bin.synthetic = true;
    }
    return {bins, key_width};
}

nlohmann::json model_to_json(const DirectionalFittsModel& model) {
    nlohmann::json bins = nlohmann::json::array();
    for (int k = 0; k < kAngleBins; ++k) {
        const auto& b = model.bin(k);
        bins.push_back({{"index", k},
                        {"a_s", b.a},
                        {"b_s_per_bit", b.b},
                        {"r2", b.r_squared},
                        {"n", b.n_samples},
                        {"outliers", b.outlier_count},
                        {"fitted", b.fitted},
                        {"synthetic", b.synthetic}});
    }
    return {{"key_width_px", model.key_width()},
            {"bins", std::move(bins)},
            {"mean_intercept_s", model.mean_intercept()}};
}

DirectionalFittsModel model_from_json(const nlohmann::json& doc) {
    try {
        const auto& bins_doc = doc.at("bins");
        if (!bins_doc.is_array() || bins_doc.size() != kAngleBins)
            throw InvalidArgument("model.bins must hold exactly 16 entries");
        std::array<FittsBinModel, kAngleBins> bins{};
        for (const auto& entry : bins_doc) {
            const int k = entry.at("index").get<int>();
            if (k < 0 || k >= kAngleBins) throw InvalidArgument("model bin index out of range");
            auto& b = bins[static_cast<std::size_t>(k)];
            b.a = entry.at("a_s").get<double>();
            b.b = entry.at("b_s_per_bit").get<double>();
            b.r_squared = entry.at("r2").get<double>();
            b.n_samples = entry.at("n").get<int>();
            b.outlier_count = entry.at("outliers").get<int>();
            b.fitted = entry.at("fitted").get<bool>();
            b.synthetic = entry.value("synthetic", false);
        }
        DirectionalFittsModel model(bins, doc.at("key_width_px").get<double>());
        if (doc.contains("mean_intercept_s") &&
            std::abs(doc.at("mean_intercept_s").get<double>() - model.mean_intercept()) > 1e-9)
            throw InvalidArgument("model.mean_intercept_s disagrees with the bin intercepts");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace abkb
