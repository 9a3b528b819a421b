#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "prefhunter/ingest.hpp"

namespace prefhunter {

enum class AttackerAction {
    InitialAccessUser,
    InitialAccessRoot,
    C2,
    IngressToolTransfer,
    PrivEsc,
    DataExfil,
    DefenseEvasion,
    Exit,
};

inline constexpr int kNumActions = 8;
inline constexpr int kNumFeatures = 6;
/// 16 feature states (active, privs, ioc, c2) plus the absorbing terminal
/// the Exit action leads to.
inline constexpr int kNumStates = 17;
inline constexpr int kTerminalState = 16;

/// Fixed feature order used everywhere weights appear.
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "discoverability", "attributability", "sophistication",
    "impact",          "duration",        "evasion",
};
/// Short labels for report ordering strings.
inline constexpr std::array<const char*, kNumFeatures> kFeatureAbbrev = {
    "Dis", "Att", "Sop", "Imp", "Dur", "Eva",
};

const char* to_string(AttackerAction action);
AttackerAction action_from_string(std::string_view s);

struct MdpState {
    bool active = false;
    Principal privs = Principal::User;
    bool ioc = false;
    bool c2 = false;
    bool operator==(const MdpState&) const = default;
};

/// State indexing: bit 0 active, bit 1 root, bit 2 ioc, bit 3 c2;
/// kTerminalState is outside the cube.
int state_index(const MdpState& s);
MdpState state_from_index(int index);

using FeatureVec = std::array<double, kNumFeatures>;

struct WeightVector {
    std::array<double, kNumFeatures> w{};

    double dot(const FeatureVec& phi) const;
    double max_abs() const;
    /// Scaled copy with max |w_i| = 1; the zero vector maps to itself.
    WeightVector normalized() const;
    bool operator==(const WeightVector&) const = default;
};

struct TrajectoryStep {
    MdpState state;
    AttackerAction action = AttackerAction::Exit;
    bool operator==(const TrajectoryStep&) const = default;
};

/// Ordered (state, action) pairs extracted from one attack, plus the
/// indicators recovered from the match bindings.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::vector<std::string> ioc_files;
    std::vector<std::string> c2_addrs;
    std::string dataset;
    bool operator==(const Trajectory&) const = default;
};

/// Host-level attacker MDP. Transitions are deterministic except PrivEsc,
/// which succeeds with probability p_esc; actions whose precondition does
/// not hold are zero-feature self-loops so the kernel is total.
class AttackerMdp {
public:
    explicit AttackerMdp(double gamma = 0.95, double p_esc = 0.8);

    double gamma() const { return gamma_; }
    double p_esc() const { return p_esc_; }

    FeatureVec features(int state, int action) const;
    FeatureVec features(const MdpState& s, AttackerAction a) const;

    /// Support of T(s, a, .) as (state index, probability) pairs.
    std::vector<std::pair<int, double>> transition(int state, int action) const;

    /// Deterministic replay view used when reconstructing trajectories from
    /// matches: PrivEsc applies its observed outcome instead of sampling.
    MdpState apply(const MdpState& s, AttackerAction a, bool privesc_succeeded) const;

    int sample_next(int state, int action, std::mt19937_64& rng) const;

private:
    double gamma_;
    double p_esc_;
};

struct ValueIterationResult {
    std::array<std::array<double, kNumActions>, kNumStates> q{};
    std::array<std::array<FeatureVec, kNumActions>, kNumStates> mu{};
    std::array<int, kNumStates> greedy{}; // lexicographically-first argmax
    int sweeps = 0;

    double value(int state) const { return q[state][greedy[state]]; }
};

/// Solve for Q* under reward w.phi to Bellman residual < tol, and compute
/// the feature occupancies mu(s,a) of the greedy policy, which satisfy
/// Q(s,a) = w.mu(s,a) at convergence.
ValueIterationResult value_iteration(const AttackerMdp& mdp, const WeightVector& w, double tol);

using Policy = std::function<int(int state)>;

/// Sample a trajectory under `policy` from s0, stopping at the terminal
/// state or after `horizon` steps. Deterministic under a fixed seed.
Trajectory rollout(const AttackerMdp& mdp, const Policy& policy, const MdpState& s0, int horizon,
                   uint64_t seed);

} // namespace prefhunter
