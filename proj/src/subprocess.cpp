#include "taxrank/subprocess.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace taxrank {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return static_cast<int>(std::max<long long>(0, left.count()));
}

// Reap the child, giving it until `deadline` to exit on its own.
int wait_for_exit(pid_t pid, Clock::time_point deadline) {
    int status = 0;
    for (;;) {
        pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) return -1;
        if (Clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

} // namespace

LineExchange run_line_exchange(const std::string& path, const std::vector<std::string>& args,
                               const std::string& input, int timeout_ms) {
    ignore_sigpipe_once();

    LineExchange result;
    int in_pipe[2];  // parent writes request
    int out_pipe[2]; // parent reads response
    if (::pipe(in_pipe) != 0) {
        result.error = std::strerror(errno);
        return result;
    }
    if (::pipe(out_pipe) != 0) {
        result.error = std::strerror(errno);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        return result;
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        result.error = std::strerror(errno);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        return result;
    }

    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);

        std::vector<char*> argv;
        argv.push_back(const_cast<char*>(path.c_str()));
        for (const std::string& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execvp(path.c_str(), argv.data());
        _exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);

    const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);

    // Push the request; a child that already exited just breaks the pipe.
    std::size_t written = 0;
    while (written < input.size()) {
        ssize_t n = ::write(in_pipe[1], input.data() + written, input.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        written += static_cast<std::size_t>(n);
    }
    ::close(in_pipe[1]);

    std::string buf;
    bool got_line = false;
    bool eof = false;
    while (!got_line && !eof) {
        int left = remaining_ms(deadline);
        if (left == 0) break;
        pollfd pfd{out_pipe[0], POLLIN, 0};
        int pr = ::poll(&pfd, 1, left);
        if (pr < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (pr == 0) break; // deadline
        char chunk[512];
        ssize_t n = ::read(out_pipe[0], chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 0) {
            eof = true;
            break;
        }
        for (ssize_t i = 0; i < n; ++i) {
            if (chunk[i] == '\n') {
                got_line = true;
                break;
            }
            buf.push_back(chunk[i]);
        }
    }
    ::close(out_pipe[0]);

    if (got_line) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        result.kind = LineExchange::Kind::Line;
        result.line = std::move(buf);
        return result;
    }

    if (eof) {
        result.kind = LineExchange::Kind::ExitedNoLine;
        result.exit_code = wait_for_exit(pid, deadline);
        return result;
    }

    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
    result.kind = LineExchange::Kind::Timeout;
    return result;
}

} // namespace taxrank
