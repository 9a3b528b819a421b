#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace prefhunter {

/// Opaque node identifier. Producers emit 128-bit ids rendered as hex
/// strings; nothing in the pipeline interprets the contents.
using Uuid = std::string;

enum class NodeKind { Subject, FileObject, NetflowObject };
enum class Principal { User, Root };
enum class EventKind { Recv, Send, Write, Read, Exec, Fork, Unlink };

const char* to_string(NodeKind kind);
const char* to_string(Principal principal);
const char* to_string(EventKind kind);
NodeKind node_kind_from_string(std::string_view s);
Principal principal_from_string(std::string_view s);
EventKind event_kind_from_string(std::string_view s);

struct SubjectAttrs {
    int64_t pid = 0;
    std::string exe;
    Principal principal = Principal::User;
    bool operator==(const SubjectAttrs&) const = default;
};

struct FileAttrs {
    std::string path;
    bool operator==(const FileAttrs&) const = default;
};

struct NetflowAttrs {
    std::string remote_addr;
    int remote_port = 0;
    bool operator==(const NetflowAttrs&) const = default;
};

/// Variant order matches NodeKind so kind() can be derived from the index.
using NodeAttrs = std::variant<SubjectAttrs, FileAttrs, NetflowAttrs>;

struct NodeRecord {
    Uuid uuid;
    NodeAttrs attrs;

    NodeKind kind() const { return static_cast<NodeKind>(attrs.index()); }
    const SubjectAttrs& subject() const { return std::get<SubjectAttrs>(attrs); }
    const FileAttrs& file() const { return std::get<FileAttrs>(attrs); }
    const NetflowAttrs& netflow() const { return std::get<NetflowAttrs>(attrs); }
    bool operator==(const NodeRecord&) const = default;
};

/// One timestamped kernel-level interaction. `subject` always names a
/// Subject node; the object kind depends on the event kind (RECV/SEND:
/// netflow, WRITE/READ/EXEC/UNLINK: file, FORK: the child subject).
struct AuditEvent {
    uint64_t seq = 0;
    int64_t ts = 0; // nanoseconds since epoch
    EventKind kind = EventKind::Recv;
    Uuid subject;
    Uuid object;
    std::map<std::string, std::string> aux;
    bool operator==(const AuditEvent&) const = default;
};

/// Inclusive time interval in nanoseconds.
struct TimeWindow {
    int64_t start = 0;
    int64_t end = 0;
    bool contains(int64_t ts) const { return ts >= start && ts <= end; }
    bool operator==(const TimeWindow&) const = default;
};

struct LogCorpus {
    std::map<Uuid, NodeRecord> nodes;
    std::vector<AuditEvent> events; // ordered by (ts, seq)
    TimeWindow window;
    /// Events parsed but discarded because their ts fell outside `window`.
    /// Not part of corpus identity.
    std::size_t dropped_outside_window = 0;

    bool same_contents(const LogCorpus& other) const {
        return nodes == other.nodes && events == other.events && window == other.window;
    }
};

/// Parse a newline-delimited stream of node/event records. When `window`
/// is given, events outside it are dropped and counted; otherwise the
/// window comes from an embedded window record, falling back to the
/// [min ts, max ts] span of the events.
///
/// Throws MalformedRecord, DanglingReference, NonMonotoneSeq.
LogCorpus parse_corpus(std::string_view stream, std::optional<TimeWindow> window = {});

/// Canonical JSON Lines form: one window record, node records sorted by
/// uuid, then events in (ts, seq) order. parse_corpus(serialize_corpus(c))
/// reproduces c exactly.
std::string serialize_corpus(const LogCorpus& corpus);

} // namespace prefhunter
