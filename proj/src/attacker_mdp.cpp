#include "prefhunter/attacker_mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace prefhunter {

const char* to_string(AttackerAction action) {
    switch (action) {
    case AttackerAction::InitialAccessUser: return "InitialAccessUser";
    case AttackerAction::InitialAccessRoot: return "InitialAccessRoot";
    case AttackerAction::C2: return "C2";
    case AttackerAction::IngressToolTransfer: return "IngressToolTransfer";
    case AttackerAction::PrivEsc: return "PrivEsc";
    case AttackerAction::DataExfil: return "DataExfil";
    case AttackerAction::DefenseEvasion: return "DefenseEvasion";
    case AttackerAction::Exit: return "Exit";
    }
    return "?";
}

AttackerAction action_from_string(std::string_view s) {
    for (int a = 0; a < kNumActions; ++a)
        if (s == to_string(static_cast<AttackerAction>(a))) return static_cast<AttackerAction>(a);
    throw std::invalid_argument("unknown action: " + std::string(s));
}

int state_index(const MdpState& s) {
    return (s.active ? 1 : 0) | (s.privs == Principal::Root ? 2 : 0) | (s.ioc ? 4 : 0) |
           (s.c2 ? 8 : 0);
}

MdpState state_from_index(int index) {
    MdpState s;
    s.active = index & 1;
    s.privs = (index & 2) ? Principal::Root : Principal::User;
    s.ioc = index & 4;
    s.c2 = index & 8;
    return s;
}

double WeightVector::dot(const FeatureVec& phi) const {
    double acc = 0;
    for (int i = 0; i < kNumFeatures; ++i) acc += w[i] * phi[i];
    return acc;
}

double WeightVector::max_abs() const {
    double m = 0;
    for (double v : w) m = std::max(m, std::fabs(v));
    return m;
}

WeightVector WeightVector::normalized() const {
    double m = max_abs();
    if (m == 0) return *this;
    WeightVector out;
    for (int i = 0; i < kNumFeatures; ++i) out.w[i] = w[i] / m;
    return out;
}

AttackerMdp::AttackerMdp(double gamma, double p_esc) : gamma_(gamma), p_esc_(p_esc) {
    if (gamma < 0 || gamma >= 1) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (p_esc <= 0 || p_esc > 1) throw std::invalid_argument("p_esc must lie in (0, 1]");
}

FeatureVec AttackerMdp::features(int state, int action) const {
    FeatureVec phi{};
    if (state == kTerminalState) return phi;
    MdpState s = state_from_index(state);
    auto a = static_cast<AttackerAction>(action);
    if (s.active && a == AttackerAction::IngressToolTransfer) phi[0] = 1; // discoverability
    if (s.active && a == AttackerAction::C2) phi[1] = 1;                  // attributability
    if (!s.active && a == AttackerAction::InitialAccessRoot) phi[2] = 1;  // sophistication
    if (s.active && a == AttackerAction::PrivEsc) phi[3] = 1;             // impact
    if (s.active && a == AttackerAction::DataExfil) phi[4] = 1;           // duration
    if (s.active && s.ioc && a == AttackerAction::DefenseEvasion) phi[5] = 1; // evasion
    return phi;
}

FeatureVec AttackerMdp::features(const MdpState& s, AttackerAction a) const {
    return features(state_index(s), static_cast<int>(a));
}

std::vector<std::pair<int, double>> AttackerMdp::transition(int state, int action) const {
    if (state == kTerminalState) return {{kTerminalState, 1.0}};
    MdpState s = state_from_index(state);
    auto a = static_cast<AttackerAction>(action);
    auto self = [&]() -> std::vector<std::pair<int, double>> { return {{state, 1.0}}; };

    switch (a) {
    case AttackerAction::InitialAccessUser:
        if (s.active) return self();
        s.active = true;
        return {{state_index(s), 1.0}};
    case AttackerAction::InitialAccessRoot:
        if (s.active) return self();
        s.active = true;
        s.privs = Principal::Root;
        return {{state_index(s), 1.0}};
    case AttackerAction::C2:
        if (!s.active) return self();
        s.c2 = true;
        return {{state_index(s), 1.0}};
    case AttackerAction::IngressToolTransfer:
        if (!s.active) return self();
        s.ioc = true;
        return {{state_index(s), 1.0}};
    case AttackerAction::PrivEsc: {
        if (!s.active || s.privs == Principal::Root) return self();
        MdpState up = s;
        up.privs = Principal::Root;
        if (p_esc_ >= 1.0) return {{state_index(up), 1.0}};
        return {{state_index(up), p_esc_}, {state, 1.0 - p_esc_}};
    }
    case AttackerAction::DataExfil:
        return self();
    case AttackerAction::DefenseEvasion:
        if (!s.active || !s.ioc) return self();
        s.ioc = false;
        return {{state_index(s), 1.0}};
    case AttackerAction::Exit:
        if (!s.active) return self();
        return {{kTerminalState, 1.0}};
    }
    return self();
}

MdpState AttackerMdp::apply(const MdpState& s, AttackerAction a, bool privesc_succeeded) const {
    MdpState out = s;
    switch (a) {
    case AttackerAction::InitialAccessUser:
        if (!s.active) out.active = true;
        break;
    case AttackerAction::InitialAccessRoot:
        if (!s.active) {
            out.active = true;
            out.privs = Principal::Root;
        }
        break;
    case AttackerAction::C2:
        if (s.active) out.c2 = true;
        break;
    case AttackerAction::IngressToolTransfer:
        if (s.active) out.ioc = true;
        break;
    case AttackerAction::PrivEsc:
        if (s.active && privesc_succeeded) out.privs = Principal::Root;
        break;
    case AttackerAction::DataExfil:
        break;
    case AttackerAction::DefenseEvasion:
        if (s.active && s.ioc) out.ioc = false;
        break;
    case AttackerAction::Exit:
        break; // caller treats the trajectory as ended
    }
    return out;
}

int AttackerMdp::sample_next(int state, int action, std::mt19937_64& rng) const {
    auto support = transition(state, action);
    if (support.size() == 1) return support[0].first;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0;
    for (const auto& [s2, p] : support) {
        acc += p;
        if (u < acc) return s2;
    }
    return support.back().first;
}

ValueIterationResult value_iteration(const AttackerMdp& mdp, const WeightVector& w, double tol) {
    if (tol <= 0) throw std::invalid_argument("tol must be positive");
    ValueIterationResult r;

    std::array<std::array<double, kNumActions>, kNumStates> reward;
    for (int s = 0; s < kNumStates; ++s)
        for (int a = 0; a < kNumActions; ++a) reward[s][a] = w.dot(mdp.features(s, a));

    const double gamma = mdp.gamma();
    std::array<double, kNumStates> v{};
    for (;;) {
        ++r.sweeps;
        double residual = 0;
        for (int s = 0; s < kNumStates; ++s) {
            for (int a = 0; a < kNumActions; ++a) {
                double q = reward[s][a];
                for (const auto& [s2, p] : mdp.transition(s, a)) q += gamma * p * v[s2];
                residual = std::max(residual, std::fabs(q - r.q[s][a]));
                r.q[s][a] = q;
            }
        }
        for (int s = 0; s < kNumStates; ++s) {
            int best = 0;
            for (int a = 1; a < kNumActions; ++a)
                if (r.q[s][a] > r.q[s][best]) best = a;
            r.greedy[s] = best;
            v[s] = r.q[s][best];
        }
        if (residual < tol) break;
    }

    // Occupancies of the greedy policy by the analogous fixed-point sweep;
    // mu_g(s) below is mu(s, greedy(s)).
    std::array<FeatureVec, kNumStates> mu_g{};
    for (;;) {
        double residual = 0;
        std::array<FeatureVec, kNumStates> next{};
        for (int s = 0; s < kNumStates; ++s) {
            int a = r.greedy[s];
            FeatureVec acc = mdp.features(s, a);
            for (const auto& [s2, p] : mdp.transition(s, a))
                for (int i = 0; i < kNumFeatures; ++i) acc[i] += gamma * p * mu_g[s2][i];
            for (int i = 0; i < kNumFeatures; ++i)
                residual = std::max(residual, std::fabs(acc[i] - mu_g[s][i]));
            next[s] = acc;
        }
        mu_g = next;
        if (residual < tol) break;
    }
    for (int s = 0; s < kNumStates; ++s)
        for (int a = 0; a < kNumActions; ++a) {
            FeatureVec acc = mdp.features(s, a);
            for (const auto& [s2, p] : mdp.transition(s, a))
                for (int i = 0; i < kNumFeatures; ++i) acc[i] += gamma * p * mu_g[s2][i];
            r.mu[s][a] = acc;
        }
    return r;
}

Trajectory rollout(const AttackerMdp& mdp, const Policy& policy, const MdpState& s0, int horizon,
                   uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    std::mt19937_64 rng(seed);
    Trajectory traj;
    int s = state_index(s0);
    for (int t = 0; t < horizon && s != kTerminalState; ++t) {
        int a = policy(s);
        traj.steps.push_back({state_from_index(s), static_cast<AttackerAction>(a)});
        s = mdp.sample_next(s, a, rng);
    }
    return traj;
}

} // namespace prefhunter
