#include <algorithm>

#include "abkb/eval.hpp"
#include "abkb/rng.hpp"

namespace abkb {

namespace {

// Click events need strictly increasing times, so a noisy draw never
// takes less than a millisecond.
constexpr double kMinAttemptTime = 1e-3;
constexpr std::uint64_t kCharacterizationStream = 3;

}  // namespace

CharacterizationSession simulate_characterization(const SimulatedUser& user, const HexGrid& grid,
                                                  std::uint64_t session_seed) {
    user.validate();
    CharacterizationSession session(grid, session_seed);
    Rng rng = make_rng(user.seed, kCharacterizationStream);
    double t = 0.0;
    std::size_t cursor = session.current_key();
    while (auto target = session.advance()) {
        const double predicted = movement_cost(user.model, grid.at(cursor), grid.at(*target));
        const double noise = user.mt_noise_sd > 0.0 ? user.mt_noise_sd * standard_normal(rng) : 0.0;
        t += std::max(kMinAttemptTime, predicted + noise);
        std::size_t clicked = *target;
        if (user.miss_rate > 0.0 && uniform_unit(rng) < user.miss_rate) {
            const auto around = grid.neighbors(*target);
            if (!around.empty()) clicked = around[static_cast<std::size_t>(uniform_index(rng, around.size()))];
        }
        session.click(clicked, t);
        cursor = clicked;
    }
    return session;
}

}  // namespace abkb
