#include "mosaic/operators/handle.hpp"

#include <unistd.h>

#include <algorithm>

namespace mosaic::operators {

using protocol::MessageName;
using supervisor::WorkerDeadError;

HumanMailbox::Ack HumanMailbox::submit(int action, std::uint64_t barrier) {
  std::lock_guard lock(mu_);
  Ack ack{pending_.has_value(), barrier};
  pending_ = action;
  submitted_at_ = barrier;
  return ack;
}

std::optional<int> HumanMailbox::take() {
  std::lock_guard lock(mu_);
  return std::exchange(pending_, std::nullopt);
}

std::optional<int> HumanMailbox::peek() const {
  std::lock_guard lock(mu_);
  return pending_;
}

namespace {

std::string join_slots(const std::vector<std::string>& slots) {
  std::string out;
  for (const auto& s : slots) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::string describe(const std::map<std::string, std::string>& failures) {
  std::string out = "joint action failed:";
  for (const auto& [slot, why] : failures) out += " [" + slot + "] " + why;
  return out;
}

std::string worker_kind_arg(const WorkerAssignment& a) {
  switch (a.worker_type) {
    case Paradigm::baseline: return std::string(to_string(a.baseline_kind()));
    case Paradigm::rl: return "greedy";
    case Paradigm::llm:
    case Paradigm::vlm: return "text";
    case Paradigm::human: break;
  }
  return "noop";
}

bool is_text(Paradigm p) { return p == Paradigm::llm || p == Paradigm::vlm; }

}  // namespace

BlockedError::BlockedError(std::vector<std::string> slots)
    : MosaicError("waiting for human action on " + join_slots(slots)), slots_(std::move(slots)) {}

JointActionError::JointActionError(std::map<std::string, std::string> failures)
    : MosaicError(describe(failures)), failures_(std::move(failures)) {}

std::filesystem::path sibling_executable(const std::string& name) {
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto candidate = self.parent_path() / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return name;
}

struct OperatorHandle::Slot {
  std::string name;
  std::size_t index = 0;
  WorkerAssignment assignment;
  env::ObservationOptions observation;
  std::optional<std::string> worker_id;
  std::unique_ptr<HumanMailbox> mailbox;
  std::deque<RgbImage> frames;
  Rng fallback_rng;
};

OperatorHandle::OperatorHandle(RunConfig config, supervisor::Supervisor& sup, BindOptions options)
    : config_(std::move(config)), sup_(sup), options_(std::move(options)), space_(config_.action_space()) {}

OperatorHandle::~OperatorHandle() {
  try {
    close();
  } catch (...) {
  }
}

std::unique_ptr<OperatorHandle> OperatorHandle::bind(const RunConfig& config, supervisor::Supervisor& sup,
                                                     BindOptions options) {
  const auto& info = config.task_info();
  for (const auto& [slot, _] : config.player_workers) {
    if (std::find(info.slots.begin(), info.slots.end(), slot) == info.slots.end()) {
      throw ValidationError("player_workers." + slot, "unknown slot for " + info.task_id);
    }
  }
  for (const auto& slot : info.slots) {
    if (!config.player_workers.count(slot)) throw ValidationError("player_workers." + slot, "slot has no assignment");
  }
  if (options.worker_executable.empty()) options.worker_executable = sibling_executable("mosaic_worker");

  std::unique_ptr<OperatorHandle> h(new OperatorHandle(config, sup, std::move(options)));
  h->slots_ = info.slots;
  try {
    for (std::size_t i = 0; i < info.slots.size(); ++i) {
      auto s = std::make_unique<Slot>();
      s->name = info.slots[i];
      s->index = i;
      s->assignment = config.player_workers.at(s->name);
      s->observation = s->assignment.observation();
      if (s->assignment.worker_type == Paradigm::human) {
        s->mailbox = std::make_unique<HumanMailbox>();
      } else {
        supervisor::WorkerSpec spec;
        spec.name = h->options_.name_prefix + s->name;
        spec.worker_kind = worker_kind(s->assignment.worker_type);
        spec.heartbeat_interval = h->options_.heartbeat_interval;
        spec.liveness_window = h->options_.liveness_window;
        spec.env_vars = h->options_.worker_env;
        spec.required.supported_commands = {MessageName::reset, MessageName::select_action, MessageName::stop};
        switch (s->observation.modality) {
          case ObservationModality::tensor: spec.required.observation_modalities = {protocol::Modality::tensor}; break;
          case ObservationModality::text: spec.required.observation_modalities = {protocol::Modality::text}; break;
          case ObservationModality::text_image:
            spec.required.observation_modalities = {protocol::Modality::text, protocol::Modality::image};
            spec.required.max_image_history = s->observation.max_image_history;
            break;
          case ObservationModality::image: spec.required.observation_modalities = {protocol::Modality::image}; break;
        }
        if (auto exe = s->assignment.executable()) {
          spec.executable = *exe;
          spec.args = s->assignment.settings.value("args", std::vector<std::string>{});
        } else {
          spec.executable = h->options_.worker_executable;
          spec.args = {"--kind", worker_kind_arg(s->assignment)};
          if (s->observation.max_image_history > 0) {
            spec.args.push_back("--max-image-history");
            spec.args.push_back(std::to_string(s->observation.max_image_history));
          }
        }
        s->worker_id = sup.spawn(spec);
      }
      h->by_slot_.emplace(s->name, std::move(s));
    }
  } catch (...) {
    h->close();
    throw;
  }
  return h;
}

OperatorHandle::Slot& OperatorHandle::slot(const std::string& name) {
  auto it = by_slot_.find(name);
  if (it == by_slot_.end()) throw ValidationError("agent_id", "slot " + name + " is not bound");
  return *it->second;
}

const OperatorHandle::Slot& OperatorHandle::slot(const std::string& name) const {
  return const_cast<OperatorHandle*>(this)->slot(name);
}

Paradigm OperatorHandle::paradigm(const std::string& name) const { return slot(name).assignment.worker_type; }

const WorkerAssignment& OperatorHandle::assignment(const std::string& name) const { return slot(name).assignment; }

HumanMailbox* OperatorHandle::mailbox(const std::string& name) const { return slot(name).mailbox.get(); }

std::optional<std::string> OperatorHandle::worker_id(const std::string& name) const { return slot(name).worker_id; }

void OperatorHandle::begin_episode(std::uint64_t run_seed, std::uint64_t episode_index) {
  std::vector<std::pair<Slot*, std::uint64_t>> pending;
  for (const auto& name : slots_) {
    auto& s = slot(name);
    s.frames.clear();
    s.fallback_rng = Rng(derive_seed(derive_seed(run_seed, kFallbackSeedStream, s.index), kFallbackSeedStream,
                                     episode_index));
    if (!s.worker_id) continue;
    Json payload{{"seed", derive_seed(derive_seed(run_seed, kWorkerSeedStream, s.index), kWorkerSeedStream,
                                      episode_index)},
                 {"task", config_.task},
                 {"slot", s.name},
                 {"settings", s.assignment.settings},
                 {"episode_index", episode_index},
                 {"checkpoint_every", config_.checkpoint_every}};
    pending.emplace_back(&s, sup_.send(*s.worker_id, MessageName::reset, std::move(payload)));
  }
  std::map<std::string, std::string> failures;
  for (auto& [s, id] : pending) {
    try {
      sup_.await(*s->worker_id, id, options_.request_timeout);
    } catch (const std::exception& e) {
      failures[s->name] = e.what();
    }
  }
  if (!failures.empty()) throw JointActionError(std::move(failures));
}

ObservationPayload OperatorHandle::observe(const env::EnvState& state, const std::string& name) {
  auto& s = slot(name);
  ObservationPayload obs = env::serialize_obs(state, name, s.observation);
  if (obs.modality == ObservationModality::text_image) {
    for (auto& frame : obs.images) s.frames.push_back(std::move(frame));
    while (s.frames.size() > s.observation.max_image_history) s.frames.pop_front();
    obs.images.assign(s.frames.begin(), s.frames.end());
  }
  return obs;
}

std::vector<std::string> OperatorHandle::blocked_slots() const {
  std::vector<std::string> out;
  for (const auto& name : slots_) {
    const auto& s = slot(name);
    if (s.mailbox && !s.mailbox->peek()) out.push_back(name);
  }
  return out;
}

Json OperatorHandle::request_payload(const std::string& slot, const ObservationPayload& obs, const Json& info) const {
  return Json{{"agent_id", slot}, {"observation", obs.to_json()}, {"info", info.is_object() ? info : Json::object()}};
}

Decision OperatorHandle::finish(Slot& s, const protocol::ProtocolMessage& response) {
  Decision d;
  auto text = response.payload.find("text");
  if (is_text(s.assignment.worker_type)) {
    d.raw_text = text != response.payload.end() && text->is_string() ? text->get<std::string>() : std::string();
    auto parsed = parse_action(*d.raw_text, space_, s.assignment.parse_policy(), s.fallback_rng);
    d.action = parsed.action;
    d.parse_outcome = parsed.outcome;
    return d;
  }
  auto action = response.payload.find("action");
  if (action == response.payload.end() || !action->is_number_integer() ||
      !space_.contains(action->get<std::int64_t>())) {
    throw supervisor::WorkerError(*s.worker_id, "action outside the action space",
                                  Json{{"field", "action"}});
  }
  d.action = action->get<int>();
  return d;
}

protocol::ProtocolMessage OperatorHandle::call(Slot& s, const Json& payload) {
  for (;;) {
    try {
      return sup_.request(*s.worker_id, MessageName::select_action, payload, options_.request_timeout);
    } catch (const WorkerDeadError&) {
      if (!options_.recover) throw;
      sup_.recover(*s.worker_id);  // PermanentFailure ends the loop
    }
  }
}

Decision OperatorHandle::select_action(const std::string& name, const ObservationPayload& obs, const Json& info) {
  auto& s = slot(name);
  if (s.mailbox) {
    auto action = s.mailbox->take();
    if (!action) throw BlockedError({name});
    return Decision{*action, std::nullopt, std::nullopt};
  }
  return finish(s, call(s, request_payload(name, obs, info)));
}

std::map<std::string, Decision> OperatorHandle::select_actions(
    const std::map<std::string, ObservationPayload>& observations, const Json& info) {
  for (const auto& [name, _] : observations) slot(name);
  for (const auto& name : slots_) {
    if (!observations.count(name)) throw ValidationError("observations", "missing slot " + name);
  }
  if (auto blocked = blocked_slots(); !blocked.empty()) throw BlockedError(std::move(blocked));

  std::map<std::string, std::uint64_t> in_flight;
  std::map<std::string, std::string> failures;
  for (const auto& name : slots_) {
    auto& s = slot(name);
    if (!s.worker_id) continue;
    try {
      in_flight[name] = sup_.send(*s.worker_id, MessageName::select_action,
                                  request_payload(name, observations.at(name), info));
    } catch (const std::exception& e) {
      failures[name] = e.what();
    }
  }
  std::map<std::string, Decision> out;
  for (const auto& name : slots_) {
    auto& s = slot(name);
    auto it = in_flight.find(name);
    if (it == in_flight.end()) continue;
    try {
      protocol::ProtocolMessage response;
      try {
        response = sup_.await(*s.worker_id, it->second, options_.request_timeout);
      } catch (const WorkerDeadError&) {
        if (!options_.recover) throw;
        sup_.recover(*s.worker_id);
        response = call(s, request_payload(name, observations.at(name), info));
      }
      out[name] = finish(s, response);
    } catch (const std::exception& e) {
      failures[name] = e.what();
    }
  }
  if (!failures.empty()) throw JointActionError(std::move(failures));
  for (const auto& name : slots_) {
    auto& s = slot(name);
    if (s.mailbox) out[name] = Decision{*s.mailbox->take(), std::nullopt, std::nullopt};
  }
  return out;
}

void OperatorHandle::train(const std::string& name, const Json& payload) {
  auto& s = slot(name);
  if (s.assignment.frozen) throw StateError("slot " + name + " is frozen; training is refused");
  if (!s.worker_id) throw StateError("slot " + name + " has no worker to train");
  sup_.request(*s.worker_id, MessageName::train, payload.is_object() ? payload : Json::object(),
               options_.request_timeout);
}

void OperatorHandle::close() {
  if (closed_) return;
  closed_ = true;
  for (const auto& [name, s] : by_slot_) {
    if (s->worker_id) sup_.stop_worker(*s->worker_id);
  }
}

}  // namespace mosaic::operators
