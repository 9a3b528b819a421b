#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefhunter/attacker_mdp.hpp"
#include "prefhunter/provenance.hpp"

namespace prefhunter {

enum class TaintReq {
    Any,
    Untrusted,
    Trusted,
    /// Bound version is the base's first untrusted version: the node
    /// becomes tainted at this event.
    FirstUntrusted,
    /// An earlier version of the base was already untrusted.
    PreviouslyUntrusted,
};

enum class PrincipalReq { Any, User, Root };

struct PatternNode {
    std::string name;
    NodeKind kind = NodeKind::Subject;
    TaintReq taint = TaintReq::Any;
    PrincipalReq principal = PrincipalReq::Any;
    bool require_external = false; // netflow address outside private ranges
};

/// One admissible realization of a pattern edge. Endpoint indexes refer to
/// the template's node list; per-alternative taint constraints refine the
/// node-level ones (used where the same logical link may appear as either
/// SEND or RECV).
struct EdgeAlternative {
    int src = 0;
    int dst = 0;
    GraphEdgeKind kind = GraphEdgeKind::Recv;
    TaintReq src_taint = TaintReq::Any;
    TaintReq dst_taint = TaintReq::Any;
};

struct PatternEdge {
    std::vector<EdgeAlternative> alternatives;
    /// Index of a pattern edge whose evidence must not come later than this
    /// one, or -1.
    int after = -1;
};

struct TemplateGraph {
    AttackerAction action = AttackerAction::C2;
    std::vector<PatternNode> nodes;
    std::vector<PatternEdge> edges;
};

struct MatcherConfig {
    /// C2 events to one address within this gap collapse into one session.
    int64_t burst_gap_ns = 30'000'000'000;
    /// Addresses treated as internal in addition to RFC 1918 and loopback.
    std::vector<std::string> external_allowlist;
};

/// A pattern node resolved against the scenario graph.
struct BoundNode {
    Uuid base;
    int version = 0;
    NodeKind kind = NodeKind::Subject;
    std::string label; // file path, netflow address, or subject exe
    Principal principal = Principal::User;
    bool untrusted = false;
    bool operator==(const BoundNode&) const = default;
};

struct ActionMatch {
    AttackerAction action = AttackerAction::C2;
    std::vector<BoundNode> binding; // aligned with the template's node list
    int64_t ts = 0;                 // latest bound edge
    uint64_t seq = 0;
    std::vector<GraphEdge> evidence;
};

/// Is `addr` outside RFC 1918, loopback, and the allowlist?
bool is_external_address(const std::string& addr, const MatcherConfig& config);

/// The seven action templates grounding the matcher: the two initial-access
/// variants, C2, ingress tool transfer, privilege escalation, defense
/// evasion, and data exfiltration. Exit has no log footprint and therefore
/// no template.
std::vector<TemplateGraph> builtin_templates();

/// All injective constraint-satisfying bindings of every template against
/// the tagged scenario graph, ordered by time, with per-address C2 bursts
/// collapsed to one match each.
std::vector<ActionMatch> match_templates(const ScenarioGraph& scenario,
                                         const std::vector<TemplateGraph>& templates,
                                         const MatcherConfig& config = {});

/// Replay the time-ordered matches through the MDP's deterministic state
/// effects, appending the synthesized Exit step. Throws OrphanAction when
/// the match list does not begin with an initial-access variant.
Trajectory extract_trajectory(const std::vector<ActionMatch>& matches, const AttackerMdp& mdp,
                              const std::string& dataset_label = {});

nlohmann::json matches_to_json(const std::vector<ActionMatch>& matches);
std::vector<ActionMatch> matches_from_json(const nlohmann::json& j);
nlohmann::json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& j);

} // namespace prefhunter
