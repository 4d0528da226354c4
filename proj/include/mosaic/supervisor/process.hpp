#pragma once

#include <sys/types.h>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/util/errors.hpp"

// POSIX plumbing for worker processes: each child leads its own session and
// process group, talks over a pipe pair, and writes stderr to a log file.
namespace mosaic::supervisor {

class SpawnError : public MosaicError {
 public:
  using MosaicError::MosaicError;
};

struct LaunchSpec {
  std::filesystem::path executable;
  std::vector<std::string> args;
  std::map<std::string, std::string> env_vars;  // merged over the parent environment
  std::filesystem::path working_dir;            // empty: inherit
  std::filesystem::path stderr_log;             // empty: /dev/null
};

struct ChildProcess {
  pid_t pid = -1;
  pid_t pgid = -1;
  int stdin_fd = -1;   // parent writes commands here
  int stdout_fd = -1;  // parent reads responses here
};

/// Forks and execs. Throws SpawnError when the executable cannot be started;
/// in that case nothing is left running.
ChildProcess launch(const LaunchSpec& spec);

struct ExitStatus {
  std::optional<int> exit_code;
  std::optional<int> signal;
};

/// Non-blocking reap of `pid`; nullopt while it is still running.
std::optional<ExitStatus> try_reap(pid_t pid);

/// Blocks until `pid` exits.
ExitStatus reap(pid_t pid);

/// Sends `sig` to every member of the group. Returns false if the group is empty.
bool signal_group(pid_t pgid, int sig);

/// Live members of a process group, read from /proc. Zombies are excluded.
std::vector<pid_t> group_members(pid_t pgid);

/// Reaps any exited children belonging to `pgid` (grandchildren adopted by a
/// subreaper parent). Returns how many were collected.
int reap_group_leftovers(pid_t pgid);

/// Makes this process adopt orphaned descendants and ignore SIGPIPE. Called
/// once by the supervisor.
void become_subreaper();

}  // namespace mosaic::supervisor
