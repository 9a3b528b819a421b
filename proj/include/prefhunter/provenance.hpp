#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefhunter/ingest.hpp"

namespace prefhunter {

/// Edge labels in the versioned graph: the seven event kinds plus the
/// version-chain edges linking consecutive versions of one base node.
enum class GraphEdgeKind { Recv, Send, Write, Read, Exec, Fork, Unlink, Version };

const char* to_string(GraphEdgeKind kind);
GraphEdgeKind graph_edge_kind_from_string(std::string_view s);
GraphEdgeKind to_graph_edge_kind(EventKind kind);

struct NodeVersion {
    Uuid base;
    int version = 0;
    auto operator<=>(const NodeVersion&) const = default;
};

struct GraphEdge {
    NodeVersion src;
    NodeVersion dst;
    GraphEdgeKind kind = GraphEdgeKind::Recv;
    int64_t ts = 0;
    uint64_t seq = 0;
    bool operator==(const GraphEdge&) const = default;
};

/// All versions of one base node. Versions carry only the untrusted tag;
/// kind and attrs are shared across versions.
struct BaseNode {
    NodeKind kind = NodeKind::Subject;
    NodeAttrs attrs;
    std::map<int, bool> versions; // version -> untrusted
    bool operator==(const BaseNode&) const = default;
};

struct ProvGraph {
    std::map<Uuid, BaseNode> nodes;
    std::vector<GraphEdge> edges; // ordered by (ts, seq), version edge before its event edge

    bool has_base(const Uuid& base) const { return nodes.count(base) != 0; }
    std::size_t version_count() const;
};

struct ScenarioGraph : ProvGraph {
    std::vector<Uuid> sources;
    std::vector<Uuid> detection_points;
};

/// Build the state-versioned provenance graph. Every corpus node starts at
/// version 0; an inbound edge whose (source base, source version, kind)
/// dependence is already carried by the destination is dropped, any other
/// inbound edge creates a new destination version linked to its predecessor
/// by a Version edge. Edge direction follows information flow.
ProvGraph build_versioned_graph(const LogCorpus& corpus);

/// Reverse time-respecting reachability from the detection points using
/// edges with ts <= t_detect. Returns the attack sources: every netflow
/// object reached, plus every subject reached through an EXEC edge (it
/// executed a file inside the backward slice). Throws UnknownNode.
std::vector<Uuid> backward_search(const ProvGraph& graph, const std::vector<Uuid>& detection,
                                  int64_t t_detect);

/// Forward time-respecting closure from all versions of the source bases
/// over edges with ts >= t0. Throws UnknownNode.
ScenarioGraph forward_scenario(const ProvGraph& graph, const std::vector<Uuid>& sources,
                               int64_t t0);

/// Tag the sources untrusted, then run the propagation rules to fixpoint:
/// RECV from untrusted netflow taints the subject, WRITE by an untrusted
/// subject taints the file, EXEC of an untrusted file taints the subject,
/// FORK by an untrusted subject taints the child. Tainting a version
/// taints every later version of that base.
ScenarioGraph propagate_tags(const ScenarioGraph& scenario);

nlohmann::json graph_to_json(const ProvGraph& graph);
nlohmann::json scenario_to_json(const ScenarioGraph& scenario);
ProvGraph graph_from_json(const nlohmann::json& j);
ScenarioGraph scenario_from_json(const nlohmann::json& j);

} // namespace prefhunter
