#pragma once

#include <string>
#include <vector>

namespace taxrank {

// Outcome of one line-protocol exchange with a child process.
struct LineExchange {
    enum class Kind {
        Line,         // got a full response line
        Timeout,      // deadline expired before a line arrived
        ExitedNoLine, // stdout closed without a complete line
        SpawnError,   // could not start the child
    };

    Kind kind = Kind::SpawnError;
    std::string line;    // valid when kind == Line (newline stripped)
    int exit_code = -1;  // valid when kind == ExitedNoLine
    std::string error;   // valid when kind == SpawnError
};

// Spawns `path` with `args`, writes `input` to its stdin, and reads stdout
// until the first newline, EOF, or the deadline. The child is killed before
// returning, so at most one exchange happens per spawn. stderr goes to
// /dev/null.
LineExchange run_line_exchange(const std::string& path, const std::vector<std::string>& args,
                               const std::string& input, int timeout_ms);

} // namespace taxrank
