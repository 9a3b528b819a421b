#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefhunter {

/// Base class for all pipeline errors. Subcommands catch this at the top
/// level and map it to a nonzero exit code tagged with the failing stage.
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedRecord : public PipelineError {
public:
    MalformedRecord(std::size_t line_no, const std::string& what)
        : PipelineError("line " + std::to_string(line_no) + ": " + what),
          line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class DanglingReference : public PipelineError {
public:
    explicit DanglingReference(const std::string& uuid)
        : PipelineError("event references undeclared node " + uuid), uuid_(uuid) {}
    const std::string& uuid() const { return uuid_; }

private:
    std::string uuid_;
};

class NonMonotoneSeq : public PipelineError {
public:
    explicit NonMonotoneSeq(const std::string& what) : PipelineError(what) {}
};

class UnknownNode : public PipelineError {
public:
    explicit UnknownNode(const std::string& uuid)
        : PipelineError("node not present in graph: " + uuid) {}
};

class OrphanAction : public PipelineError {
public:
    explicit OrphanAction(const std::string& what) : PipelineError(what) {}
};

class EmptyEvidence : public PipelineError {
public:
    EmptyEvidence() : PipelineError("no trajectories supplied") {}
};

class NonFiniteObjective : public PipelineError {
public:
    NonFiniteObjective() : PipelineError("objective diverged; reduce the step size") {}
};

class DegenerateRanking : public PipelineError {
public:
    DegenerateRanking() : PipelineError("constant weight vector has no defined rank correlation") {}
};

class InvalidScript : public PipelineError {
public:
    explicit InvalidScript(const std::string& what) : PipelineError(what) {}
};

} // namespace prefhunter
