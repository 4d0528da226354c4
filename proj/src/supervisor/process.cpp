#include "mosaic/supervisor/process.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

extern char** environ;

namespace mosaic::supervisor {

namespace {

struct Pipe {
  int read = -1;
  int write = -1;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw SpawnError(std::string("pipe2: ") + std::strerror(errno));
  return {fds[0], fds[1]};
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

std::vector<std::string> environment_for(const LaunchSpec& spec) {
  std::map<std::string, std::string> merged;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    auto eq = kv.find('=');
    if (eq != std::string::npos) merged[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : spec.env_vars) merged[k] = v;
  std::vector<std::string> out;
  for (const auto& [k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

std::vector<char*> pointers(std::vector<std::string>& strings) {
  std::vector<char*> out;
  for (auto& s : strings) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

// Runs in the forked child: only async-signal-safe calls from here on.
[[noreturn]] void exec_child(int in_read, int out_write, int status_write, const char* log_path, const char* dir,
                             char* const* argv, char* const* envp) {
  auto fail = [status_write](int err) {
    [[maybe_unused]] auto n = ::write(status_write, &err, sizeof err);
    ::_exit(127);
  };
  ::setsid();
  ::signal(SIGPIPE, SIG_DFL);
  ::signal(SIGTERM, SIG_DFL);
  if (::dup2(in_read, 0) < 0 || ::dup2(out_write, 1) < 0) fail(errno);
  int log_fd = ::open(log_path, O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (log_fd < 0) fail(errno);
  if (::dup2(log_fd, 2) < 0) fail(errno);
  if (dir[0] != '\0' && ::chdir(dir) != 0) fail(errno);
  ::execve(argv[0], argv, envp);
  fail(errno);
}

}  // namespace

ChildProcess launch(const LaunchSpec& spec) {
  std::vector<std::string> argv_s{spec.executable.string()};
  argv_s.insert(argv_s.end(), spec.args.begin(), spec.args.end());
  std::vector<std::string> env_s = environment_for(spec);
  auto argv = pointers(argv_s);
  auto envp = pointers(env_s);
  const std::string log_path = spec.stderr_log.empty() ? "/dev/null" : spec.stderr_log.string();
  const std::string dir = spec.working_dir.string();
  if (!spec.stderr_log.empty() && spec.stderr_log.has_parent_path()) {
    std::filesystem::create_directories(spec.stderr_log.parent_path());
  }

  Pipe to_child = make_pipe();
  Pipe from_child = make_pipe();
  Pipe status = make_pipe();
  pid_t pid = ::fork();
  if (pid < 0) {
    int err = errno;
    for (int* fd : {&to_child.read, &to_child.write, &from_child.read, &from_child.write, &status.read, &status.write}) {
      close_fd(*fd);
    }
    throw SpawnError(std::string("fork: ") + std::strerror(err));
  }
  if (pid == 0) {
    exec_child(to_child.read, from_child.write, status.write, log_path.c_str(), dir.c_str(), argv.data(),
               envp.data());
  }
  close_fd(to_child.read);
  close_fd(from_child.write);
  close_fd(status.write);

  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(status.read, &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  close_fd(status.read);
  if (n > 0) {
    reap(pid);
    close_fd(to_child.write);
    close_fd(from_child.read);
    throw SpawnError("cannot start " + spec.executable.string() + ": " + std::strerror(child_errno));
  }
  // setsid() ran before execve, so the child leads its own group.
  return ChildProcess{pid, pid, to_child.write, from_child.read};
}

std::optional<ExitStatus> try_reap(pid_t pid) {
  int status = 0;
  pid_t r;
  do {
    r = ::waitpid(pid, &status, WNOHANG);
  } while (r < 0 && errno == EINTR);
  if (r == 0) return std::nullopt;
  ExitStatus out;
  if (r < 0) return out;  // already reaped elsewhere
  if (WIFEXITED(status)) out.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) out.signal = WTERMSIG(status);
  return out;
}

ExitStatus reap(pid_t pid) {
  int status = 0;
  pid_t r;
  do {
    r = ::waitpid(pid, &status, 0);
  } while (r < 0 && errno == EINTR);
  ExitStatus out;
  if (r < 0) return out;
  if (WIFEXITED(status)) out.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) out.signal = WTERMSIG(status);
  return out;
}

bool signal_group(pid_t pgid, int sig) {
  if (pgid <= 1) return false;
  return ::kill(-pgid, sig) == 0;
}

std::vector<pid_t> group_members(pid_t pgid) {
  std::vector<pid_t> out;
  DIR* proc = ::opendir("/proc");
  if (!proc) return out;
  while (auto* entry = ::readdir(proc)) {
    char* end = nullptr;
    long pid = std::strtol(entry->d_name, &end, 10);
    if (*end != '\0' || pid <= 0) continue;
    std::ifstream stat("/proc/" + std::string(entry->d_name) + "/stat");
    std::string line;
    if (!std::getline(stat, line)) continue;
    // Fields after the parenthesised command name: state ppid pgrp ...
    auto close = line.rfind(')');
    if (close == std::string::npos) continue;
    std::istringstream rest(line.substr(close + 1));
    char state = 0;
    long ppid = 0, pgrp = 0;
    rest >> state >> ppid >> pgrp;
    if (pgrp == pgid && state != 'Z') out.push_back(static_cast<pid_t>(pid));
  }
  ::closedir(proc);
  return out;
}

int reap_group_leftovers(pid_t pgid) {
  int n = 0;
  for (;;) {
    pid_t r = ::waitpid(-pgid, nullptr, WNOHANG);
    if (r <= 0) return n;
    ++n;
  }
}

void become_subreaper() {
  ::prctl(PR_SET_CHILD_SUBREAPER, 1);
  ::signal(SIGPIPE, SIG_IGN);
}

}  // namespace mosaic::supervisor
