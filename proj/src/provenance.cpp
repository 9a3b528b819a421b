#include "prefhunter/provenance.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <tuple>

#include "prefhunter/errors.hpp"

namespace prefhunter {

using nlohmann::json;

const char* to_string(GraphEdgeKind kind) {
    switch (kind) {
    case GraphEdgeKind::Recv: return "RECV";
    case GraphEdgeKind::Send: return "SEND";
    case GraphEdgeKind::Write: return "WRITE";
    case GraphEdgeKind::Read: return "READ";
    case GraphEdgeKind::Exec: return "EXEC";
    case GraphEdgeKind::Fork: return "FORK";
    case GraphEdgeKind::Unlink: return "UNLINK";
    case GraphEdgeKind::Version: return "VERSION";
    }
    return "?";
}

GraphEdgeKind graph_edge_kind_from_string(std::string_view s) {
    if (s == "VERSION") return GraphEdgeKind::Version;
    return to_graph_edge_kind(event_kind_from_string(s));
}

GraphEdgeKind to_graph_edge_kind(EventKind kind) {
    switch (kind) {
    case EventKind::Recv: return GraphEdgeKind::Recv;
    case EventKind::Send: return GraphEdgeKind::Send;
    case EventKind::Write: return GraphEdgeKind::Write;
    case EventKind::Read: return GraphEdgeKind::Read;
    case EventKind::Exec: return GraphEdgeKind::Exec;
    case EventKind::Fork: return GraphEdgeKind::Fork;
    case EventKind::Unlink: return GraphEdgeKind::Unlink;
    }
    return GraphEdgeKind::Recv;
}

std::size_t ProvGraph::version_count() const {
    std::size_t n = 0;
    for (const auto& [base, node] : nodes) n += node.versions.size();
    return n;
}

namespace {

/// Information-flow endpoints of an event: RECV/READ/EXEC flow object to
/// subject, the rest flow subject to object.
std::pair<Uuid, Uuid> flow_endpoints(const AuditEvent& ev) {
    switch (ev.kind) {
    case EventKind::Recv:
    case EventKind::Read:
    case EventKind::Exec: return {ev.object, ev.subject};
    default: return {ev.subject, ev.object};
    }
}

using TimeKey = std::pair<int64_t, uint64_t>;

TimeKey time_key(const GraphEdge& e) { return {e.ts, e.seq}; }

} // namespace

ProvGraph build_versioned_graph(const LogCorpus& corpus) {
    ProvGraph g;
    std::map<Uuid, int> cur; // current version per base
    std::map<Uuid, std::set<std::tuple<Uuid, int, GraphEdgeKind>>> carried;

    for (const auto& [uuid, node] : corpus.nodes) {
        BaseNode bn;
        bn.kind = node.kind();
        bn.attrs = node.attrs;
        bn.versions[0] = false;
        g.nodes.emplace(uuid, std::move(bn));
        cur[uuid] = 0;
    }

    for (const AuditEvent& ev : corpus.events) {
        auto [src, dst] = flow_endpoints(ev);
        GraphEdgeKind kind = to_graph_edge_kind(ev.kind);
        int sv = cur.at(src);
        auto key = std::make_tuple(src, sv, kind);
        auto& deps = carried[dst];
        if (deps.count(key)) continue; // dependence already carried
        deps.insert(key);
        int dv = ++cur.at(dst);
        g.nodes.at(dst).versions[dv] = false;
        g.edges.push_back({{dst, dv - 1}, {dst, dv}, GraphEdgeKind::Version, ev.ts, ev.seq});
        g.edges.push_back({{src, sv}, {dst, dv}, kind, ev.ts, ev.seq});
    }
    return g;
}

std::vector<Uuid> backward_search(const ProvGraph& graph, const std::vector<Uuid>& detection,
                                  int64_t t_detect) {
    for (const Uuid& d : detection)
        if (!graph.has_base(d)) throw UnknownNode(d);

    constexpr TimeKey kMax{std::numeric_limits<int64_t>::max(),
                           std::numeric_limits<uint64_t>::max()};
    // Latest edge time through which each versioned node can still influence
    // a detection point.
    std::map<NodeVersion, TimeKey> bound;
    for (const Uuid& d : detection)
        for (const auto& [v, tainted] : graph.nodes.at(d).versions)
            bound[{d, v}] = {t_detect, kMax.second};

    std::set<Uuid> exec_subjects;
    for (auto it = graph.edges.rbegin(); it != graph.edges.rend(); ++it) {
        const GraphEdge& e = *it;
        if (e.ts > t_detect) continue;
        auto dst_it = bound.find(e.dst);
        if (dst_it == bound.end() || time_key(e) > dst_it->second) continue;
        if (e.kind == GraphEdgeKind::Exec) exec_subjects.insert(e.dst.base);
        auto [src_it, inserted] = bound.emplace(e.src, time_key(e));
        if (!inserted && src_it->second < time_key(e)) src_it->second = time_key(e);
    }

    std::set<Uuid> sources;
    for (const auto& [nv, t] : bound)
        if (graph.nodes.at(nv.base).kind == NodeKind::NetflowObject) sources.insert(nv.base);
    sources.insert(exec_subjects.begin(), exec_subjects.end());
    return {sources.begin(), sources.end()};
}

ScenarioGraph forward_scenario(const ProvGraph& graph, const std::vector<Uuid>& sources,
                               int64_t t0) {
    for (const Uuid& s : sources)
        if (!graph.has_base(s)) throw UnknownNode(s);

    // Earliest edge time at which each versioned node becomes reachable.
    std::map<NodeVersion, TimeKey> reached;
    for (const Uuid& s : sources)
        for (const auto& [v, tainted] : graph.nodes.at(s).versions)
            reached[{s, v}] = {t0, 0};

    ScenarioGraph sg;
    sg.sources = sources;
    for (const GraphEdge& e : graph.edges) {
        if (e.ts < t0) continue;
        auto src_it = reached.find(e.src);
        if (src_it == reached.end() || time_key(e) < src_it->second) continue;
        sg.edges.push_back(e);
        auto [dst_it, inserted] = reached.emplace(e.dst, time_key(e));
        if (!inserted && dst_it->second > time_key(e)) dst_it->second = time_key(e);
    }

    for (const auto& [nv, t] : reached) {
        const BaseNode& src = graph.nodes.at(nv.base);
        BaseNode& out = sg.nodes[nv.base];
        out.kind = src.kind;
        out.attrs = src.attrs;
        out.versions[nv.version] = src.versions.at(nv.version);
    }
    return sg;
}

ScenarioGraph propagate_tags(const ScenarioGraph& scenario) {
    ScenarioGraph sg = scenario;

    auto taint = [&](const Uuid& base, int from_version) {
        bool changed = false;
        auto& versions = sg.nodes.at(base).versions;
        for (auto it = versions.lower_bound(from_version); it != versions.end(); ++it) {
            if (!it->second) {
                it->second = true;
                changed = true;
            }
        }
        return changed;
    };

    for (const Uuid& s : sg.sources)
        if (sg.has_base(s)) taint(s, 0);

    auto untrusted = [&](const NodeVersion& nv) {
        return sg.nodes.at(nv.base).versions.at(nv.version);
    };
    auto kind_of = [&](const NodeVersion& nv) { return sg.nodes.at(nv.base).kind; };

    bool changed = true;
    while (changed) {
        changed = false;
        for (const GraphEdge& e : sg.edges) {
            if (!untrusted(e.src)) continue;
            bool fires = false;
            switch (e.kind) {
            case GraphEdgeKind::Recv:
                fires = kind_of(e.src) == NodeKind::NetflowObject;
                break;
            case GraphEdgeKind::Write:
                fires = kind_of(e.src) == NodeKind::Subject &&
                        kind_of(e.dst) == NodeKind::FileObject;
                break;
            case GraphEdgeKind::Exec:
                fires = kind_of(e.src) == NodeKind::FileObject;
                break;
            case GraphEdgeKind::Fork:
                fires = kind_of(e.src) == NodeKind::Subject &&
                        kind_of(e.dst) == NodeKind::Subject;
                break;
            case GraphEdgeKind::Version:
                fires = true; // later versions of a tainted base are tainted
                break;
            default:
                break;
            }
            if (fires && taint(e.dst.base, e.dst.version)) changed = true;
        }
    }
    return sg;
}

namespace {

json attrs_to_json(NodeKind kind, const NodeAttrs& attrs) {
    switch (kind) {
    case NodeKind::Subject: {
        const auto& a = std::get<SubjectAttrs>(attrs);
        return {{"pid", a.pid}, {"exe", a.exe}, {"principal", to_string(a.principal)}};
    }
    case NodeKind::FileObject:
        return {{"path", std::get<FileAttrs>(attrs).path}};
    case NodeKind::NetflowObject: {
        const auto& a = std::get<NetflowAttrs>(attrs);
        return {{"remote_addr", a.remote_addr}, {"remote_port", a.remote_port}};
    }
    }
    return {};
}

NodeAttrs attrs_from_json(NodeKind kind, const json& j) {
    switch (kind) {
    case NodeKind::Subject:
        return SubjectAttrs{j.at("pid").get<int64_t>(), j.at("exe").get<std::string>(),
                            principal_from_string(j.at("principal").get<std::string>())};
    case NodeKind::FileObject:
        return FileAttrs{j.at("path").get<std::string>()};
    case NodeKind::NetflowObject:
        return NetflowAttrs{j.at("remote_addr").get<std::string>(),
                            j.at("remote_port").get<int>()};
    }
    return {};
}

} // namespace

json graph_to_json(const ProvGraph& graph) {
    json nodes = json::array();
    for (const auto& [base, bn] : graph.nodes)
        for (const auto& [version, tainted] : bn.versions)
            nodes.push_back({{"base", base},
                             {"version", version},
                             {"kind", to_string(bn.kind)},
                             {"attrs", attrs_to_json(bn.kind, bn.attrs)},
                             {"untrusted", tainted}});
    json edges = json::array();
    for (const GraphEdge& e : graph.edges)
        edges.push_back({{"src", e.src.base},
                         {"src_v", e.src.version},
                         {"dst", e.dst.base},
                         {"dst_v", e.dst.version},
                         {"kind", to_string(e.kind)},
                         {"ts", e.ts},
                         {"seq", e.seq}});
    return {{"nodes", nodes}, {"edges", edges}};
}

json scenario_to_json(const ScenarioGraph& scenario) {
    json j = graph_to_json(scenario);
    j["sources"] = scenario.sources;
    j["detection_points"] = scenario.detection_points;
    return j;
}

namespace {

void graph_common_from_json(const json& j, ProvGraph& g) {
    for (const json& n : j.at("nodes")) {
        Uuid base = n.at("base").get<std::string>();
        NodeKind kind = node_kind_from_string(n.at("kind").get<std::string>());
        BaseNode& bn = g.nodes[base];
        bn.kind = kind;
        bn.attrs = attrs_from_json(kind, n.at("attrs"));
        bn.versions[n.at("version").get<int>()] = n.at("untrusted").get<bool>();
    }
    for (const json& e : j.at("edges"))
        g.edges.push_back({{e.at("src").get<std::string>(), e.at("src_v").get<int>()},
                           {e.at("dst").get<std::string>(), e.at("dst_v").get<int>()},
                           graph_edge_kind_from_string(e.at("kind").get<std::string>()),
                           e.at("ts").get<int64_t>(),
                           e.at("seq").get<uint64_t>()});
}

} // namespace

ProvGraph graph_from_json(const json& j) {
    ProvGraph g;
    graph_common_from_json(j, g);
    return g;
}

ScenarioGraph scenario_from_json(const json& j) {
    ScenarioGraph sg;
    graph_common_from_json(j, sg);
    if (j.contains("sources")) sg.sources = j.at("sources").get<std::vector<Uuid>>();
    if (j.contains("detection_points"))
        sg.detection_points = j.at("detection_points").get<std::vector<Uuid>>();
    return sg;
}

} // namespace prefhunter
