#pragma once

#include <stdexcept>
#include <string>

namespace pavad {

enum class ErrorKind {
    Ingestion,
    Windowing,
    Spec,
    Mask,
    Segmentation,
    InpainterContract,
    Flow,
    Patch,
    Shape,
    Loss,
    Label,
    Training,
    Score,
    Weight,
    Evaluation,
    Checkpoint,
    Config,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace pavad
