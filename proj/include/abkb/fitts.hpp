#pragma once

// Direction-aware Fitts' law: MT = a + b * log2(D / W + 1), with one (a, b)
// pair per 22.5-degree movement direction.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abkb/hexgeom.hpp"

namespace abkb {

inline constexpr double kGenericIntercept = 0.127;     // s
inline constexpr double kGenericSlope = 1.0 / 4.9;     // s/bit

struct MovementSample {
    double distance = 0.0;             ///< px
    std::optional<double> angle;       ///< degrees; empty iff distance == 0
    double movement_time = 0.0;        ///< s
    int demanded_bin = 0;
    int distance_class = 0;

    /// Bin the sample is regressed in: the movement direction, or the
    /// demanded bin for a zero-distance click.
    int bin() const { return angle ? angle_bin(*angle) : demanded_bin; }
};

struct FittsBinModel {
    double a = 0.0;
    double b = 0.0;
    double r_squared = 0.0;
    int n_samples = 0;
    int outlier_count = 0;
    bool fitted = false;
    bool synthetic = false;

    friend bool operator==(const FittsBinModel&, const FittsBinModel&) = default;
};

class DirectionalFittsModel {
public:
    DirectionalFittsModel() = default;
    DirectionalFittsModel(std::array<FittsBinModel, kAngleBins> bins, double key_width);

    const std::array<FittsBinModel, kAngleBins>& bins() const noexcept { return bins_; }
    const FittsBinModel& bin(int index) const { return bins_.at(static_cast<std::size_t>(index)); }
    double key_width() const noexcept { return key_width_; }

    /// Mean of the sixteen intercepts; unfitted bins count at the fallback value.
    double mean_intercept() const noexcept { return mean_intercept_; }

    bool all_fitted() const noexcept;
    bool any_fitted() const noexcept;

    /// Constants used for prediction in `bin`: the bin's own fit, or the
    /// mean over fitted bins when that bin could not be fitted.
    std::pair<double, double> constants(int bin) const;

    friend bool operator==(const DirectionalFittsModel&, const DirectionalFittsModel&) = default;

private:
    std::array<FittsBinModel, kAngleBins> bins_{};
    double key_width_ = 0.0;
    double mean_intercept_ = 0.0;
    double fallback_a_ = 0.0;
    double fallback_b_ = 0.0;
};

double index_of_difficulty(double distance, double key_width);

struct FitReport {
    DirectionalFittsModel model;
    /// Indices into the input samples whose residual exceeds 3 residual SDs.
    std::vector<std::size_t> outliers;
};

/// Per-bin ordinary least squares of MT on ID. Bins with fewer than two
/// distinct IDs are left unfitted. Throws InvalidArgument on an empty list.
FitReport fit_bins_detailed(std::span<const MovementSample> samples, double key_width);
DirectionalFittsModel fit_bins(std::span<const MovementSample> samples, double key_width);

/// Predicted movement time in seconds, clamped at 0. A zero distance costs
/// the mean intercept; otherwise `angle` must be present.
double predict_mt(const DirectionalFittsModel& model, std::optional<double> angle,
                  double distance);

DirectionalFittsModel generic_model(double key_width);

/// Synthetic model whose slope varies with direction as
/// b = b_vertical * (1 + (horizontal_ratio - 1) * cos^2(theta)).
DirectionalFittsModel anisotropic_model(double key_width, double a, double b_vertical,
                                        double horizontal_ratio);

nlohmann::json model_to_json(const DirectionalFittsModel& model);
DirectionalFittsModel model_from_json(const nlohmann::json& doc);

}  // namespace abkb
