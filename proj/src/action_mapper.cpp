#include "prefhunter/action_mapper.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "prefhunter/errors.hpp"

namespace prefhunter {

using nlohmann::json;

namespace {

bool parse_ipv4(const std::string& addr, std::array<int, 4>& octets) {
    int a, b, c, d;
    char tail;
    if (std::sscanf(addr.c_str(), "%d.%d.%d.%d%c", &a, &b, &c, &d, &tail) != 4) return false;
    for (int v : {a, b, c, d})
        if (v < 0 || v > 255) return false;
    octets = {a, b, c, d};
    return true;
}

} // namespace

bool is_external_address(const std::string& addr, const MatcherConfig& config) {
    for (const std::string& allowed : config.external_allowlist)
        if (addr == allowed) return false;
    std::array<int, 4> o{};
    if (parse_ipv4(addr, o)) {
        if (o[0] == 10) return false;                          // 10/8
        if (o[0] == 172 && o[1] >= 16 && o[1] <= 31) return false; // 172.16/12
        if (o[0] == 192 && o[1] == 168) return false;          // 192.168/16
        if (o[0] == 127) return false;                         // loopback
        return true;
    }
    if (addr == "::1") return false;
    return true;
}

std::vector<TemplateGraph> builtin_templates() {
    std::vector<TemplateGraph> out;

    auto netflow = [](std::string name, TaintReq taint = TaintReq::Any) {
        return PatternNode{std::move(name), NodeKind::NetflowObject, taint, PrincipalReq::Any,
                           true};
    };
    auto subject = [](std::string name, TaintReq taint, PrincipalReq principal) {
        return PatternNode{std::move(name), NodeKind::Subject, taint, principal, false};
    };
    auto file = [](std::string name, TaintReq taint) {
        return PatternNode{std::move(name), NodeKind::FileObject, taint, PrincipalReq::Any, false};
    };

    // Initial access: intrusion from an external socket into the process
    // that becomes tainted by it.
    for (auto [action, principal] :
         {std::pair{AttackerAction::InitialAccessUser, PrincipalReq::User},
          std::pair{AttackerAction::InitialAccessRoot, PrincipalReq::Root}}) {
        TemplateGraph t;
        t.action = action;
        t.nodes = {netflow("socket", TaintReq::Untrusted),
                   subject("victim", TaintReq::FirstUntrusted, principal)};
        t.edges = {{{{0, 1, GraphEdgeKind::Recv}}, -1}};
        out.push_back(std::move(t));
    }

    // C2: an already-compromised process exchanging traffic with an
    // external address, in either direction.
    {
        TemplateGraph t;
        t.action = AttackerAction::C2;
        t.nodes = {subject("agent", TaintReq::Untrusted, PrincipalReq::Any), netflow("c2")};
        t.edges = {{{{0, 1, GraphEdgeKind::Send},
                     {1, 0, GraphEdgeKind::Recv, TaintReq::Any, TaintReq::PreviouslyUntrusted}},
                    -1}};
        out.push_back(std::move(t));
    }

    // Ingress tool transfer: a tainted process drops a file, making it
    // untrusted.
    {
        TemplateGraph t;
        t.action = AttackerAction::IngressToolTransfer;
        t.nodes = {subject("agent", TaintReq::Untrusted, PrincipalReq::Any),
                   file("payload", TaintReq::FirstUntrusted)};
        t.edges = {{{{0, 1, GraphEdgeKind::Write}}, -1}};
        out.push_back(std::move(t));
    }

    // Privilege escalation: a privileged process image spawned from an
    // untrusted file.
    {
        TemplateGraph t;
        t.action = AttackerAction::PrivEsc;
        t.nodes = {file("payload", TaintReq::Untrusted),
                   subject("elevated", TaintReq::Untrusted, PrincipalReq::Root)};
        t.edges = {{{{0, 1, GraphEdgeKind::Exec}}, -1}};
        out.push_back(std::move(t));
    }

    // Defense evasion: a tainted process unlinking one of the untrusted
    // artifacts.
    {
        TemplateGraph t;
        t.action = AttackerAction::DefenseEvasion;
        t.nodes = {subject("agent", TaintReq::Untrusted, PrincipalReq::Any),
                   file("artifact", TaintReq::Untrusted)};
        t.edges = {{{{0, 1, GraphEdgeKind::Unlink}}, -1}};
        out.push_back(std::move(t));
    }

    // Data exfiltration: a tainted process reads a benign file and then
    // sends to an external address.
    {
        TemplateGraph t;
        t.action = AttackerAction::DataExfil;
        t.nodes = {subject("agent", TaintReq::Untrusted, PrincipalReq::Any),
                   file("sensitive", TaintReq::Trusted), netflow("drop")};
        t.edges = {{{{1, 0, GraphEdgeKind::Read}}, -1}, {{{0, 2, GraphEdgeKind::Send}}, 0}};
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

constexpr int kNoUntrustedVersion = std::numeric_limits<int>::max();

struct ScenarioIndex {
    const ScenarioGraph& sg;
    const MatcherConfig& config;
    std::map<Uuid, int> first_untrusted;

    explicit ScenarioIndex(const ScenarioGraph& scenario, const MatcherConfig& cfg)
        : sg(scenario), config(cfg) {
        for (const auto& [base, node] : sg.nodes) {
            int first = kNoUntrustedVersion;
            for (const auto& [v, tainted] : node.versions)
                if (tainted) {
                    first = v;
                    break;
                }
            first_untrusted[base] = first;
        }
    }

    bool taint_ok(TaintReq req, const Uuid& base, int version) const {
        bool tainted = sg.nodes.at(base).versions.at(version);
        int first = first_untrusted.at(base);
        switch (req) {
        case TaintReq::Any: return true;
        case TaintReq::Untrusted: return tainted;
        case TaintReq::Trusted: return !tainted;
        case TaintReq::FirstUntrusted: return tainted && version == first;
        case TaintReq::PreviouslyUntrusted: return first < version;
        }
        return false;
    }

    bool node_ok(const PatternNode& pn, const Uuid& base, int version) const {
        const BaseNode& node = sg.nodes.at(base);
        if (node.kind != pn.kind) return false;
        if (!taint_ok(pn.taint, base, version)) return false;
        if (pn.kind == NodeKind::Subject && pn.principal != PrincipalReq::Any) {
            Principal p = std::get<SubjectAttrs>(node.attrs).principal;
            if ((pn.principal == PrincipalReq::Root) != (p == Principal::Root)) return false;
        }
        if (pn.kind == NodeKind::NetflowObject && pn.require_external &&
            !is_external_address(std::get<NetflowAttrs>(node.attrs).remote_addr, config))
            return false;
        return true;
    }

    BoundNode resolve(const Uuid& base, int version) const {
        const BaseNode& node = sg.nodes.at(base);
        BoundNode b;
        b.base = base;
        b.version = version;
        b.kind = node.kind;
        b.untrusted = node.versions.at(version);
        switch (node.kind) {
        case NodeKind::Subject:
            b.label = std::get<SubjectAttrs>(node.attrs).exe;
            b.principal = std::get<SubjectAttrs>(node.attrs).principal;
            break;
        case NodeKind::FileObject:
            b.label = std::get<FileAttrs>(node.attrs).path;
            break;
        case NodeKind::NetflowObject:
            b.label = std::get<NetflowAttrs>(node.attrs).remote_addr;
            break;
        }
        return b;
    }
};

struct PartialBinding {
    Uuid base;
    int version = -1;              // version at the node's latest evidence edge
    std::pair<int64_t, uint64_t> latest{std::numeric_limits<int64_t>::min(), 0};
    bool bound = false;
};

void enumerate_matches(const ScenarioIndex& index, const TemplateGraph& tmpl,
                       std::vector<ActionMatch>& out) {
    const auto& edges = index.sg.edges;
    std::vector<PartialBinding> binding(tmpl.nodes.size());
    std::vector<const GraphEdge*> evidence(tmpl.edges.size(), nullptr);
    std::set<std::vector<std::pair<Uuid, int>>> seen;

    auto endpoint_ok = [&](int pattern_node, const NodeVersion& nv) {
        if (!index.sg.has_base(nv.base)) return false;
        if (!index.node_ok(tmpl.nodes[pattern_node], nv.base, nv.version)) return false;
        const PartialBinding& pb = binding[pattern_node];
        if (pb.bound && pb.base != nv.base) return false;
        for (std::size_t i = 0; i < binding.size(); ++i)
            if (static_cast<int>(i) != pattern_node && binding[i].bound &&
                binding[i].base == nv.base)
                return false; // injectivity over pattern nodes
        return true;
    };

    auto bind_endpoint = [&](int pattern_node, const NodeVersion& nv, const GraphEdge& e) {
        PartialBinding& pb = binding[pattern_node];
        PartialBinding saved = pb;
        pb.bound = true;
        pb.base = nv.base;
        if (std::pair{e.ts, e.seq} >= pb.latest) {
            pb.latest = {e.ts, e.seq};
            pb.version = nv.version;
        }
        return saved;
    };

    std::function<void(std::size_t)> recurse = [&](std::size_t edge_idx) {
        if (edge_idx == tmpl.edges.size()) {
            std::vector<std::pair<Uuid, int>> key;
            for (const PartialBinding& pb : binding) key.emplace_back(pb.base, pb.version);
            if (!seen.insert(key).second) return;
            ActionMatch m;
            m.action = tmpl.action;
            for (const PartialBinding& pb : binding)
                m.binding.push_back(index.resolve(pb.base, pb.version));
            m.ts = std::numeric_limits<int64_t>::min();
            for (const GraphEdge* e : evidence) {
                m.evidence.push_back(*e);
                if (std::pair{e->ts, e->seq} >= std::pair{m.ts, m.seq}) {
                    m.ts = e->ts;
                    m.seq = e->seq;
                }
            }
            out.push_back(std::move(m));
            return;
        }
        const PatternEdge& pe = tmpl.edges[edge_idx];
        for (const GraphEdge& e : edges) {
            if (pe.after >= 0) {
                const GraphEdge* prev = evidence[pe.after];
                if (std::pair{e.ts, e.seq} < std::pair{prev->ts, prev->seq}) continue;
            }
            for (const EdgeAlternative& alt : pe.alternatives) {
                if (e.kind != alt.kind) continue;
                if (!endpoint_ok(alt.src, e.src) || !endpoint_ok(alt.dst, e.dst)) continue;
                if (!index.taint_ok(alt.src_taint, e.src.base, e.src.version)) continue;
                if (!index.taint_ok(alt.dst_taint, e.dst.base, e.dst.version)) continue;
                PartialBinding s1 = bind_endpoint(alt.src, e.src, e);
                PartialBinding s2 = bind_endpoint(alt.dst, e.dst, e);
                evidence[edge_idx] = &e;
                recurse(edge_idx + 1);
                evidence[edge_idx] = nullptr;
                binding[alt.dst] = s2;
                binding[alt.src] = s1;
            }
        }
    };
    recurse(0);
}

std::vector<ActionMatch> collapse_c2_bursts(std::vector<ActionMatch> matches, int64_t gap_ns) {
    std::vector<ActionMatch> out;
    // session key: (agent base, address base); matches arrive time-ordered
    std::map<std::pair<Uuid, Uuid>, std::size_t> open; // key -> index in out
    std::map<std::pair<Uuid, Uuid>, int64_t> last_ts;
    for (ActionMatch& m : matches) {
        if (m.action != AttackerAction::C2) {
            out.push_back(std::move(m));
            continue;
        }
        auto key = std::make_pair(m.binding[0].base, m.binding[1].base);
        auto it = open.find(key);
        if (it != open.end() && m.ts - last_ts[key] <= gap_ns) {
            ActionMatch& rep = out[it->second];
            rep.evidence.insert(rep.evidence.end(), m.evidence.begin(), m.evidence.end());
            last_ts[key] = m.ts;
            continue;
        }
        last_ts[key] = m.ts;
        open[key] = out.size();
        out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(), [](const ActionMatch& a, const ActionMatch& b) {
        return std::tie(a.ts, a.seq, a.action) < std::tie(b.ts, b.seq, b.action);
    });
    return out;
}

} // namespace

std::vector<ActionMatch> match_templates(const ScenarioGraph& scenario,
                                         const std::vector<TemplateGraph>& templates,
                                         const MatcherConfig& config) {
    ScenarioIndex index(scenario, config);
    std::vector<ActionMatch> matches;
    for (const TemplateGraph& tmpl : templates) enumerate_matches(index, tmpl, matches);
    std::sort(matches.begin(), matches.end(), [](const ActionMatch& a, const ActionMatch& b) {
        auto ka = std::tie(a.ts, a.seq, a.action);
        auto kb = std::tie(b.ts, b.seq, b.action);
        if (ka != kb) return ka < kb;
        return a.binding < b.binding;
    });
    return collapse_c2_bursts(std::move(matches), config.burst_gap_ns);
}

Trajectory extract_trajectory(const std::vector<ActionMatch>& matches, const AttackerMdp& mdp,
                              const std::string& dataset_label) {
    if (matches.empty()) throw OrphanAction("no matches to replay");
    if (matches.front().action != AttackerAction::InitialAccessUser &&
        matches.front().action != AttackerAction::InitialAccessRoot)
        throw OrphanAction(std::string("first match is ") + to_string(matches.front().action) +
                           ", expected an initial-access action");

    Trajectory traj;
    traj.dataset = dataset_label;
    std::set<std::string> iocs, addrs;
    MdpState state; // initial: inactive, user, no ioc, no c2
    for (const ActionMatch& m : matches) {
        traj.steps.push_back({state, m.action});
        bool privesc_ok = false;
        if (m.action == AttackerAction::PrivEsc) {
            // observed outcome: a root-principal tainted subject in evidence
            for (const BoundNode& b : m.binding)
                if (b.kind == NodeKind::Subject && b.principal == Principal::Root && b.untrusted)
                    privesc_ok = true;
        }
        state = mdp.apply(state, m.action, privesc_ok);
        if (m.action == AttackerAction::IngressToolTransfer)
            iocs.insert(m.binding[1].label);
        else if (m.action == AttackerAction::C2)
            addrs.insert(m.binding[1].label);
    }
    traj.steps.push_back({state, AttackerAction::Exit});
    traj.ioc_files.assign(iocs.begin(), iocs.end());
    traj.c2_addrs.assign(addrs.begin(), addrs.end());
    return traj;
}

namespace {

json edge_to_json(const GraphEdge& e) {
    return {{"src", e.src.base}, {"src_v", e.src.version}, {"dst", e.dst.base},
            {"dst_v", e.dst.version}, {"kind", to_string(e.kind)}, {"ts", e.ts}, {"seq", e.seq}};
}

GraphEdge edge_from_json(const json& j) {
    return {{j.at("src").get<std::string>(), j.at("src_v").get<int>()},
            {j.at("dst").get<std::string>(), j.at("dst_v").get<int>()},
            graph_edge_kind_from_string(j.at("kind").get<std::string>()),
            j.at("ts").get<int64_t>(),
            j.at("seq").get<uint64_t>()};
}

} // namespace

json matches_to_json(const std::vector<ActionMatch>& matches) {
    json arr = json::array();
    for (const ActionMatch& m : matches) {
        json binding = json::array();
        for (const BoundNode& b : m.binding)
            binding.push_back({{"base", b.base},
                               {"version", b.version},
                               {"kind", to_string(b.kind)},
                               {"label", b.label},
                               {"principal", to_string(b.principal)},
                               {"untrusted", b.untrusted}});
        json evidence = json::array();
        for (const GraphEdge& e : m.evidence) evidence.push_back(edge_to_json(e));
        arr.push_back({{"action", to_string(m.action)},
                       {"ts", m.ts},
                       {"seq", m.seq},
                       {"binding", binding},
                       {"evidence", evidence}});
    }
    return arr;
}

std::vector<ActionMatch> matches_from_json(const json& j) {
    std::vector<ActionMatch> out;
    for (const json& jm : j) {
        ActionMatch m;
        m.action = action_from_string(jm.at("action").get<std::string>());
        m.ts = jm.at("ts").get<int64_t>();
        m.seq = jm.at("seq").get<uint64_t>();
        for (const json& jb : jm.at("binding")) {
            BoundNode b;
            b.base = jb.at("base").get<std::string>();
            b.version = jb.at("version").get<int>();
            b.kind = node_kind_from_string(jb.at("kind").get<std::string>());
            b.label = jb.at("label").get<std::string>();
            b.principal = principal_from_string(jb.at("principal").get<std::string>());
            b.untrusted = jb.at("untrusted").get<bool>();
            m.binding.push_back(std::move(b));
        }
        for (const json& je : jm.at("evidence")) m.evidence.push_back(edge_from_json(je));
        out.push_back(std::move(m));
    }
    return out;
}

json trajectory_to_json(const Trajectory& trajectory) {
    json steps = json::array();
    for (const TrajectoryStep& step : trajectory.steps)
        steps.push_back({{"state",
                          {{"active", step.state.active},
                           {"privs", to_string(step.state.privs)},
                           {"ioc", step.state.ioc},
                           {"c2", step.state.c2}}},
                         {"action", to_string(step.action)}});
    return {{"steps", steps},
            {"ioc_files", trajectory.ioc_files},
            {"c2_addrs", trajectory.c2_addrs},
            {"dataset", trajectory.dataset}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory traj;
    for (const json& js : j.at("steps")) {
        TrajectoryStep step;
        const json& st = js.at("state");
        step.state.active = st.at("active").get<bool>();
        step.state.privs = principal_from_string(st.at("privs").get<std::string>());
        step.state.ioc = st.at("ioc").get<bool>();
        step.state.c2 = st.at("c2").get<bool>();
        step.action = action_from_string(js.at("action").get<std::string>());
        traj.steps.push_back(step);
    }
    traj.ioc_files = j.at("ioc_files").get<std::vector<std::string>>();
    traj.c2_addrs = j.at("c2_addrs").get<std::vector<std::string>>();
    if (j.contains("dataset")) traj.dataset = j.at("dataset").get<std::string>();
    return traj;
}

} // namespace prefhunter
