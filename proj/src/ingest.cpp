#include "prefhunter/ingest.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "prefhunter/errors.hpp"

namespace prefhunter {

using nlohmann::json;

const char* to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::Subject: return "Subject";
    case NodeKind::FileObject: return "FileObject";
    case NodeKind::NetflowObject: return "NetflowObject";
    }
    return "?";
}

const char* to_string(Principal principal) {
    return principal == Principal::Root ? "root" : "user";
}

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Recv: return "RECV";
    case EventKind::Send: return "SEND";
    case EventKind::Write: return "WRITE";
    case EventKind::Read: return "READ";
    case EventKind::Exec: return "EXEC";
    case EventKind::Fork: return "FORK";
    case EventKind::Unlink: return "UNLINK";
    }
    return "?";
}

NodeKind node_kind_from_string(std::string_view s) {
    if (s == "Subject") return NodeKind::Subject;
    if (s == "FileObject") return NodeKind::FileObject;
    if (s == "NetflowObject") return NodeKind::NetflowObject;
    throw std::invalid_argument("unknown node kind: " + std::string(s));
}

Principal principal_from_string(std::string_view s) {
    if (s == "user") return Principal::User;
    if (s == "root") return Principal::Root;
    throw std::invalid_argument("unknown principal: " + std::string(s));
}

EventKind event_kind_from_string(std::string_view s) {
    if (s == "RECV") return EventKind::Recv;
    if (s == "SEND") return EventKind::Send;
    if (s == "WRITE") return EventKind::Write;
    if (s == "READ") return EventKind::Read;
    if (s == "EXEC") return EventKind::Exec;
    if (s == "FORK") return EventKind::Fork;
    if (s == "UNLINK") return EventKind::Unlink;
    throw std::invalid_argument("unknown event kind: " + std::string(s));
}

namespace {

NodeRecord parse_node_line(const json& j, std::size_t line_no) {
    NodeRecord rec;
    rec.uuid = j.at("uuid").get<std::string>();
    if (rec.uuid.empty()) throw MalformedRecord(line_no, "empty uuid");
    NodeKind kind = node_kind_from_string(j.at("kind").get<std::string>());
    const json& attrs = j.at("attrs");
    switch (kind) {
    case NodeKind::Subject: {
        SubjectAttrs a;
        a.pid = attrs.at("pid").get<int64_t>();
        a.exe = attrs.at("exe").get<std::string>();
        a.principal = principal_from_string(attrs.at("principal").get<std::string>());
        rec.attrs = a;
        break;
    }
    case NodeKind::FileObject: {
        FileAttrs a;
        a.path = attrs.at("path").get<std::string>();
        rec.attrs = a;
        break;
    }
    case NodeKind::NetflowObject: {
        NetflowAttrs a;
        a.remote_addr = attrs.at("remote_addr").get<std::string>();
        a.remote_port = attrs.at("remote_port").get<int>();
        if (a.remote_port < 0 || a.remote_port > 65535)
            throw MalformedRecord(line_no, "remote_port out of range");
        rec.attrs = a;
        break;
    }
    }
    return rec;
}

AuditEvent parse_event_line(const json& j) {
    AuditEvent ev;
    ev.seq = j.at("seq").get<uint64_t>();
    ev.ts = j.at("ts").get<int64_t>();
    ev.kind = event_kind_from_string(j.at("kind").get<std::string>());
    ev.subject = j.at("subject").get<std::string>();
    ev.object = j.at("object").get<std::string>();
    if (j.contains("aux"))
        ev.aux = j.at("aux").get<std::map<std::string, std::string>>();
    return ev;
}

NodeKind expected_object_kind(EventKind kind) {
    switch (kind) {
    case EventKind::Recv:
    case EventKind::Send: return NodeKind::NetflowObject;
    case EventKind::Fork: return NodeKind::Subject;
    default: return NodeKind::FileObject;
    }
}

} // namespace

LogCorpus parse_corpus(std::string_view stream, std::optional<TimeWindow> window) {
    LogCorpus corpus;
    std::vector<std::pair<AuditEvent, std::size_t>> pending; // event + line for diagnostics
    std::optional<TimeWindow> embedded;
    std::optional<uint64_t> last_seq;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= stream.size()) {
        std::size_t nl = stream.find('\n', pos);
        std::string_view line = stream.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        pos = nl == std::string_view::npos ? stream.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(line_no, e.what());
        }
        try {
            const std::string rec = j.at("rec").get<std::string>();
            if (rec == "node") {
                NodeRecord node = parse_node_line(j, line_no);
                auto [it, inserted] = corpus.nodes.emplace(node.uuid, std::move(node));
                if (!inserted)
                    throw MalformedRecord(line_no, "duplicate node uuid " + it->first);
            } else if (rec == "event") {
                AuditEvent ev = parse_event_line(j);
                if (last_seq && ev.seq <= *last_seq)
                    throw NonMonotoneSeq("seq " + std::to_string(ev.seq) +
                                         " does not advance past " + std::to_string(*last_seq));
                last_seq = ev.seq;
                pending.emplace_back(std::move(ev), line_no);
            } else if (rec == "window") {
                embedded = TimeWindow{j.at("start").get<int64_t>(), j.at("end").get<int64_t>()};
            } else {
                throw MalformedRecord(line_no, "unknown record type '" + rec + "'");
            }
        } catch (const json::exception& e) {
            throw MalformedRecord(line_no, e.what());
        }
    }

    if (window)
        corpus.window = *window;
    else if (embedded)
        corpus.window = *embedded;
    else if (!pending.empty()) {
        int64_t lo = std::numeric_limits<int64_t>::max(), hi = std::numeric_limits<int64_t>::min();
        for (const auto& [ev, ln] : pending) {
            lo = std::min(lo, ev.ts);
            hi = std::max(hi, ev.ts);
        }
        corpus.window = {lo, hi};
    }

    for (auto& [ev, ln] : pending) {
        auto sub = corpus.nodes.find(ev.subject);
        if (sub == corpus.nodes.end()) throw DanglingReference(ev.subject);
        if (sub->second.kind() != NodeKind::Subject)
            throw MalformedRecord(ln, "event subject " + ev.subject + " is not a Subject");
        auto obj = corpus.nodes.find(ev.object);
        if (obj == corpus.nodes.end()) throw DanglingReference(ev.object);
        if (obj->second.kind() != expected_object_kind(ev.kind))
            throw MalformedRecord(ln, std::string("object kind mismatch for ") + to_string(ev.kind));
        if (!corpus.window.contains(ev.ts)) {
            ++corpus.dropped_outside_window;
            continue;
        }
        corpus.events.push_back(std::move(ev));
    }

    std::sort(corpus.events.begin(), corpus.events.end(),
              [](const AuditEvent& a, const AuditEvent& b) {
                  return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq);
              });
    return corpus;
}

std::string serialize_corpus(const LogCorpus& corpus) {
    std::ostringstream out;
    out << json{{"rec", "window"}, {"start", corpus.window.start}, {"end", corpus.window.end}}.dump()
        << '\n';
    for (const auto& [uuid, node] : corpus.nodes) {
        json attrs;
        switch (node.kind()) {
        case NodeKind::Subject:
            attrs = {{"pid", node.subject().pid},
                     {"exe", node.subject().exe},
                     {"principal", to_string(node.subject().principal)}};
            break;
        case NodeKind::FileObject:
            attrs = {{"path", node.file().path}};
            break;
        case NodeKind::NetflowObject:
            attrs = {{"remote_addr", node.netflow().remote_addr},
                     {"remote_port", node.netflow().remote_port}};
            break;
        }
        out << json{{"rec", "node"}, {"uuid", uuid}, {"kind", to_string(node.kind())}, {"attrs", attrs}}
                   .dump()
            << '\n';
    }
    for (const AuditEvent& ev : corpus.events) {
        json j{{"rec", "event"}, {"seq", ev.seq},     {"ts", ev.ts},
               {"kind", to_string(ev.kind)}, {"subject", ev.subject}, {"object", ev.object}};
        if (!ev.aux.empty()) j["aux"] = ev.aux;
        out << j.dump() << '\n';
    }
    return out.str();
}

} // namespace prefhunter
