#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include "aabo/anchor_space.hpp"
#include "aabo/error.hpp"
#include "aabo/objectives.hpp"
#include "aabo/serialization.hpp"

namespace aabo {

// One request line: {"config": <aabo-config/1>, "budget_index": t, "seed": s}\n
inline std::string external_request(const AnchorConfiguration& config, std::size_t budget_index,
                                    std::uint64_t seed) {
  json req = {{"config", to_json(config)}, {"budget_index", budget_index}, {"seed", seed}};
  return req.dump() + "\n";
}

// Parses the child's stdout: a single finite decimal, surrounding whitespace allowed.
inline double parse_external_reward(const std::string& out) {
  const auto first = out.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ObjectiveFailure("external objective printed nothing");
  const auto last = out.find_last_not_of(" \t\r\n");
  const std::string_view body(out.data() + first, last - first + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(v)) {
    throw ObjectiveFailure("external objective output is not a finite decimal: \"" +
                           std::string(body.substr(0, 64)) + "\"");
  }
  return v;
}

namespace detail {

struct FdGuard {
  int fd = -1;
  ~FdGuard() {
    if (fd >= 0) ::close(fd);
  }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

}  // namespace detail

// Runs `/bin/sh -c command`, feeds the request on stdin, and reads the reward
// from stdout. Nonzero exit, bad output, or a timeout raise ObjectiveFailure.
inline double run_external_command(const std::string& command, const std::string& request,
                                   std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  int in_pair[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
    throw ObjectiveFailure("socketpair failed");
  }
  detail::FdGuard in_parent{in_pair[0]}, in_child{in_pair[1]};
  int out_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw ObjectiveFailure("pipe failed");
  detail::FdGuard out_read{out_pipe[0]}, out_write{out_pipe[1]};

  const pid_t pid = ::fork();
  if (pid < 0) throw ObjectiveFailure("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_child.fd, STDIN_FILENO);
    ::dup2(out_write.fd, STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  in_child.reset();
  out_write.reset();

  const auto deadline = clock::now() + timeout;
  auto kill_child = [&] {
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
    int st;
    ::waitpid(pid, &st, 0);
  };

  std::size_t sent = 0;
  while (sent < request.size()) {
    const ssize_t n = ::send(in_parent.fd, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;  // child closed stdin early; its exit status decides
    }
    sent += static_cast<std::size_t>(n);
  }
  ::shutdown(in_parent.fd, SHUT_WR);

  std::string out;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) {
      kill_child();
      throw ObjectiveFailure("external objective timed out after " + std::to_string(timeout.count()) + " ms");
    }
    pollfd p{out_read.fd, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) continue;
    const ssize_t n = ::read(out_read.fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }

  int status = 0;
  for (;;) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) throw ObjectiveFailure("waitpid failed");
    if (clock::now() >= deadline) {
      kill_child();
      throw ObjectiveFailure("external objective timed out after " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw ObjectiveFailure("external objective exited with status " +
                           std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  return parse_external_reward(out);
}

struct ExternalCommandOptions {
  std::chrono::milliseconds timeout{60000};
  int max_concurrency = 4;
};

// Objective backed by an external command; at most max_concurrency children run at once.
inline Objective make_external_objective(std::string command, ExternalCommandOptions options = {}) {
  if (options.max_concurrency < 1) throw InvalidInput("max_concurrency must be >= 1");
  auto slots = std::make_shared<std::counting_semaphore<1024>>(std::min(options.max_concurrency, 1024));
  Objective obj;
  obj.evaluate = [command = std::move(command), options, slots](
                     const AnchorConfiguration& c, std::size_t t, std::uint64_t seed) {
    slots->acquire();
    try {
      const double v = run_external_command(command, external_request(c, t, seed), options.timeout);
      slots->release();
      return v;
    } catch (...) {
      slots->release();
      throw;
    }
  };
  return obj;
}

}  // namespace aabo
