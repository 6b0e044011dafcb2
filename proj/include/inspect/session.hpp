#pragma once

// Transport-agnostic session service: scenes, interactive quality
// accumulation, path recording and scrubbing, planning and asynchronous
// evaluation. Every mutation of one session is serialized on that session's
// mutex; scenes are immutable and shared.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "inspect/evaluator.hpp"
#include "inspect/json_io.hpp"
#include "inspect/kinematics.hpp"
#include "inspect/planner.hpp"
#include "inspect/scene.hpp"

namespace inspect {

enum class ControlMode { FreeCamera, Robot };

inline const char* to_string(ControlMode m) { return m == ControlMode::Robot ? "robot" : "free-camera"; }

inline ControlMode control_mode_from_string(const std::string& s) {
  if (s == "free-camera") return ControlMode::FreeCamera;
  if (s == "robot") return ControlMode::Robot;
  throw ValidationError("unknown mode '" + s + "' (expected free-camera or robot)");
}

// One interactive step. In free-camera mode only `pose` is allowed. In robot
// mode `pose` is a TCP target solved by IK, `joint_delta` is added to the
// current joints and `extra_axis` moves the external axis (first joint).
struct PoseCommand {
  std::optional<ViewPose> pose;
  std::optional<JointState> joint_delta;
  std::optional<double> extra_axis;
  std::optional<double> time;  // sample timestamp in s; defaults to the wall clock
};

struct PoseUpdate {
  std::uint64_t seq = 0;  // sequence number of the delta batch; 0 when nothing was applied
  std::vector<QualityChange> delta;
  std::size_t visible = 0;
  bool ik_ok = true;
  ViewPose pose;
  JointState joints;
};

struct DeltaBatch {
  std::uint64_t seq = 0;
  std::vector<QualityChange> changes;
};

enum class RecordingAction { Start, Stop, Scrub };

inline RecordingAction recording_action_from_string(const std::string& s) {
  if (s == "start") return RecordingAction::Start;
  if (s == "stop") return RecordingAction::Stop;
  if (s == "scrub") return RecordingAction::Scrub;
  throw ValidationError("unknown recording action '" + s + "' (expected start, stop or scrub)");
}

struct RecordingStatus {
  bool recording = false;
  std::size_t samples = 0;          // in the active recording
  std::size_t stored_paths = 0;
  std::optional<std::size_t> path;  // index of the path stored by stop
  ViewPose pose;
  JointState joints;
  std::vector<std::string> warnings;
};

struct SessionInfo {
  std::string id;
  std::string scene;
  ControlMode mode = ControlMode::FreeCamera;
  ViewPose pose;
  JointState joints;
  bool recording = false;
  std::size_t samples = 0;
  std::size_t stored_paths = 0;
  std::uint64_t seq = 0;
  double total_quality = 0.0;
  std::vector<double> quality;
};

enum class JobState { Pending, Running, Done, Failed };

inline const char* to_string(JobState s) {
  switch (s) {
    case JobState::Pending: return "pending";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "failed";
}

struct EvaluationJob {
  std::string id;
  std::string session;
  JobState state = JobState::Pending;
  std::optional<EvaluationReport> report;
  std::string error;
};

// Starting pose for a free camera: on -y of the object, one d_opt beyond its
// bounding box, looking at the centre.
inline ViewPose default_camera_pose(const Scene& scene) {
  const auto box = scene.mesh.bounds();
  const Vec3 centre = box.center();
  const double reach = 0.5 * box.diagonal().norm() + scene.config.sensor.model.d_opt;
  return look_at(centre - Vec3(0.0, reach, 0.0), centre);
}

// All joints at zero, clamped into their limits.
inline JointState home_state(const KinematicChain& chain) {
  JointState q(chain.dof());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& j = chain.joints[i];
    q[i] = std::clamp(0.0, j.lower, j.upper);
  }
  return q;
}

class SessionService {
 public:
  explicit SessionService(std::filesystem::path snapshot_dir = {}, std::size_t workers = 1)
      : snapshot_dir_(std::move(snapshot_dir)), rng_(std::random_device{}()) {
    if (workers == 0) workers = 1;
    for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { work(); });
  }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  ~SessionService() {
    {
      std::lock_guard lock(queue_mutex_);
      stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& w : workers_) w.join();
    // Wake any stream waiting for deltas.
    std::shared_lock lock(sessions_mutex_);
    for (auto& [id, s] : sessions_) s->cv.notify_all();
  }

  void add_scene(const std::string& name, Scene scene) {
    if (name.empty()) throw ValidationError("scene name must not be empty");
    auto ptr = std::make_shared<const Scene>(std::move(scene));
    std::unique_lock lock(scenes_mutex_);
    scenes_[name] = std::move(ptr);
  }

  std::vector<std::string> scene_names() const {
    std::shared_lock lock(scenes_mutex_);
    std::vector<std::string> out;
    for (const auto& [name, s] : scenes_) out.push_back(name);
    return out;
  }

  std::shared_ptr<const Scene> scene(const std::string& name) const {
    std::shared_lock lock(scenes_mutex_);
    auto it = scenes_.find(name);
    if (it == scenes_.end()) throw NotFoundError("unknown scene '" + name + "'");
    return it->second;
  }

  std::string create_session(const std::string& scene_name, ControlMode mode = ControlMode::FreeCamera,
                             std::optional<JointState> joints = std::nullopt) {
    auto sc = scene(scene_name);
    auto s = std::make_shared<Session>();
    s->scene_name = scene_name;
    s->scene = sc;
    s->mode = mode;
    s->acc = AccumulatedQuality(sc->points.size());
    if (mode == ControlMode::Robot) {
      if (!sc->config.chain) throw ValidationError("scene '" + scene_name + "' has no kinematic chain");
      s->joints = joints ? *joints : home_state(*sc->config.chain);
      if (s->joints.size() != sc->config.chain->dof()) throw ValidationError("joint state length does not match chain");
      if (!sc->config.chain->within_limits(s->joints)) throw ValidationError("initial joints violate limits");
      s->pose = forward(*sc->config.chain, s->joints);
    } else {
      if (joints) throw ValidationError("joint state given for a free-camera session");
      s->pose = default_camera_pose(*sc);
    }
    std::unique_lock lock(sessions_mutex_);
    std::string id;
    do {
      id = token();
    } while (sessions_.contains(id));
    s->id = id;
    sessions_[id] = std::move(s);
    return id;
  }

  PoseUpdate update_pose(const std::string& id, const PoseCommand& cmd) {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    const Scene& sc = *s->scene;
    PoseUpdate out;

    ViewPose target = s->pose;
    JointState joints = s->joints;
    if (s->mode == ControlMode::FreeCamera) {
      if (cmd.joint_delta || cmd.extra_axis) throw ValidationError("joint commands need robot mode");
      if (!cmd.pose) throw ValidationError("pose update needs a pose");
      require_valid(*cmd.pose);
      target = *cmd.pose;
    } else {
      const auto& chain = *sc.config.chain;
      if (!cmd.pose && !cmd.joint_delta && !cmd.extra_axis) throw ValidationError("pose update needs a pose or joint command");
      if (cmd.joint_delta) {
        if (cmd.joint_delta->size() != chain.dof()) throw ValidationError("joint delta length does not match chain");
        for (std::size_t i = 0; i < joints.size(); ++i) joints[i] += (*cmd.joint_delta)[i];
      }
      if (cmd.extra_axis) {
        if (!chain.extra_axis) throw ValidationError("chain has no extra axis");
        joints[0] += *cmd.extra_axis;
      }
      for (double v : joints) {
        if (!std::isfinite(v)) throw ValidationError("joint command is not finite");
      }
      bool ok = chain.within_limits(joints);
      if (ok && cmd.pose) {
        require_valid(*cmd.pose);
        IkOptions opt;
        opt.restarts = 0;  // follow the seed; jumping branches would teleport the arm
        auto ik = solve_ik(chain, *cmd.pose, joints, opt);
        ok = ik.success;
        joints = std::move(ik.state);
      }
      if (!ok) {
        out.ik_ok = false;
        out.pose = s->pose;
        out.joints = s->joints;
        return out;
      }
      target = forward(chain, joints);
    }

    double t = 0.0;
    if (s->recording) {
      t = cmd.time ? *cmd.time : seconds_since(s->recording_start);
      if (!s->active.samples.empty() && !(t >= s->active.samples.back().time)) {
        throw ValidationError("sample time goes backwards");
      }
    }

    const auto depth = render_depth(sc.mesh, target, sc.config.sensor.camera);
    const auto mask = visible_points(sc.points, target, sc.config.sensor.camera, depth, sc.config.sensor.depth_bias);
    const auto fresh = qualities_from_mask(sc.points, target, sc.config.sensor.model, mask);
    for (bool v : mask) out.visible += v ? 1 : 0;

    s->pose = target;
    s->joints = std::move(joints);
    out.delta = accumulate_in_place(s->acc, target, fresh);
    out.seq = ++s->seq;
    s->log.push_back({out.seq, out.delta});
    if (s->recording) s->active.samples.push_back({target, t, s->joints});
    out.pose = s->pose;
    out.joints = s->joints;
    s->cv.notify_all();
    return out;
  }

  // Scrub moves to the stored sample nearest `fraction` of the active
  // recording, or of the last stored path when idle. Nothing is truncated.
  RecordingStatus recording(const std::string& id, RecordingAction action, std::optional<double> fraction = {}) {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    RecordingStatus st;
    switch (action) {
      case RecordingAction::Start:
        if (s->recording) throw ConflictError("a recording is already in progress");
        s->recording = true;
        s->active = {};
        s->recording_start = std::chrono::steady_clock::now();
        break;
      case RecordingAction::Stop: {
        if (!s->recording) throw ConflictError("no recording in progress");
        s->recording = false;
        if (s->active.empty()) st.warnings.push_back("recording stopped with no samples; nothing stored");
        else {
          s->paths.push_back(std::move(s->active));
          st.path = s->paths.size() - 1;
        }
        s->active = {};
        persist(*s);
        break;
      }
      case RecordingAction::Scrub: {
        if (!fraction) throw ValidationError("scrub needs a fraction");
        const RecordedPath* src = s->recording ? &s->active : (s->paths.empty() ? nullptr : &s->paths.back());
        if (!src || src->empty()) throw ValidationError("nothing recorded to scrub");
        if (!(*fraction >= 0.0 && *fraction <= 1.0)) throw ValidationError("scrub fraction must lie in [0, 1]");
        const auto idx = static_cast<std::size_t>(std::lround(*fraction * static_cast<double>(src->size() - 1)));
        const auto& sample = src->samples[idx];
        s->pose = sample.pose;
        if (s->mode == ControlMode::Robot && !sample.joints.empty()) s->joints = sample.joints;
        break;
      }
    }
    st.recording = s->recording;
    st.samples = s->active.size();
    st.stored_paths = s->paths.size();
    st.pose = s->pose;
    st.joints = s->joints;
    return st;
  }

  // Stores an externally produced path (e.g. a planner traversal) for evaluation.
  std::size_t add_path(const std::string& id, RecordedPath path) {
    path.validate();
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    s->paths.push_back(std::move(path));
    return s->paths.size() - 1;
  }

  RecordedPath path(const std::string& id, std::size_t index) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    if (index >= s->paths.size()) throw NotFoundError("no stored path " + std::to_string(index));
    return s->paths[index];
  }

  EvaluationReport evaluate(const std::string& id, std::size_t index) const {
    auto [sc, p] = evaluation_input(id, index);
    return inspect::evaluate(p, sc->evaluation_scene(), sc->config.evaluation);
  }

  std::string submit_evaluation(const std::string& id, std::size_t index) {
    auto input = evaluation_input(id, index);
    auto job = std::make_shared<EvaluationJob>();
    job->session = id;
    {
      std::lock_guard lock(jobs_mutex_);
      job->id = "job-" + std::to_string(++job_counter_);
      jobs_[job->id] = job;
    }
    {
      std::lock_guard lock(queue_mutex_);
      queue_.push_back([this, job, input = std::move(input)] {
        set_job(*job, JobState::Running);
        try {
          auto report = inspect::evaluate(input.second, input.first->evaluation_scene(), input.first->config.evaluation);
          std::lock_guard lock(jobs_mutex_);
          job->report = std::move(report);
          job->state = JobState::Done;
        } catch (const std::exception& e) {
          std::lock_guard lock(jobs_mutex_);
          job->error = e.what();
          job->state = JobState::Failed;
        }
        jobs_cv_.notify_all();
      });
    }
    queue_cv_.notify_one();
    return job->id;
  }

  EvaluationJob job(const std::string& job_id) const {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFoundError("unknown job '" + job_id + "'");
    return *it->second;
  }

  EvaluationJob wait_job(const std::string& job_id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw NotFoundError("unknown job '" + job_id + "'");
    auto job = it->second;
    jobs_cv_.wait_for(lock, timeout, [&] { return job->state == JobState::Done || job->state == JobState::Failed; });
    return *job;
  }

  PlanSolution plan(const std::string& scene_name, double budget) const {
    auto sc = scene(scene_name);
    const PlanningProblem problem{sc->graph, sc->quality, sc->config.cost, budget};
    return gcb_plus(problem, gcb(problem));
  }

  SessionInfo info(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    SessionInfo i;
    i.id = s->id;
    i.scene = s->scene_name;
    i.mode = s->mode;
    i.pose = s->pose;
    i.joints = s->joints;
    i.recording = s->recording;
    i.samples = s->active.size();
    i.stored_paths = s->paths.size();
    i.seq = s->seq;
    i.total_quality = s->acc.total();
    i.quality = s->acc.values;
    return i;
  }

  std::vector<DeltaBatch> deltas_since(const std::string& id, std::uint64_t since) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return batches_after(*s, since);
  }

  // Blocks until a batch newer than `since` exists, the timeout passes or the
  // service shuts down.
  std::vector<DeltaBatch> wait_deltas(const std::string& id, std::uint64_t since, std::chrono::milliseconds timeout) const {
    auto s = session(id);
    std::unique_lock lock(s->mutex);
    s->cv.wait_for(lock, timeout, [&] { return s->seq > since || stopping(); });
    return batches_after(*s, since);
  }

  bool stopping() const {
    std::lock_guard lock(queue_mutex_);
    return stopping_;
  }

  Json snapshot(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return snapshot_json(*s);
  }

 private:
  struct Session {
    mutable std::mutex mutex;
    mutable std::condition_variable cv;
    std::string id;
    std::string scene_name;
    std::shared_ptr<const Scene> scene;
    ControlMode mode = ControlMode::FreeCamera;
    ViewPose pose;
    JointState joints;
    AccumulatedQuality acc;
    bool recording = false;
    std::chrono::steady_clock::time_point recording_start;
    RecordedPath active;
    std::vector<RecordedPath> paths;
    std::uint64_t seq = 0;
    std::vector<DeltaBatch> log;
  };

  std::shared_ptr<Session> session(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  std::pair<std::shared_ptr<const Scene>, RecordedPath> evaluation_input(const std::string& id, std::size_t index) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    if (index >= s->paths.size()) throw NotFoundError("no stored path " + std::to_string(index));
    return {s->scene, s->paths[index]};
  }

  static std::vector<DeltaBatch> batches_after(const Session& s, std::uint64_t since) {
    // Sequence numbers are 1-based and dense, so batch n sits at index n - 1.
    std::vector<DeltaBatch> out;
    for (std::size_t i = static_cast<std::size_t>(std::min<std::uint64_t>(since, s.log.size())); i < s.log.size(); ++i) {
      out.push_back(s.log[i]);
    }
    return out;
  }

  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  static Json snapshot_json(const Session& s) {
    Json paths = Json::array();
    for (const auto& p : s.paths) paths.push_back(path_to_json(p));
    return {{"schema", kSchemaVersion}, {"id", s.id},           {"scene", s.scene_name},
            {"mode", to_string(s.mode)}, {"pose", pose_to_json(s.pose)}, {"joints", s.joints},
            {"seq", s.seq},             {"quality", s.acc.values}, {"paths", paths}};
  }

  void persist(const Session& s) const {
    if (snapshot_dir_.empty()) return;
    std::filesystem::create_directories(snapshot_dir_);
    write_json_file(snapshot_dir_ / (s.id + ".json"), snapshot_json(s));
  }

  std::string token() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    std::lock_guard lock(rng_mutex_);
    auto v = rng_();
    for (auto& c : out) {
      c = kHex[v & 0xf];
      v >>= 4;
    }
    return out;
  }

  void set_job(EvaluationJob& job, JobState state) {
    std::lock_guard lock(jobs_mutex_);
    job.state = state;
  }

  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(queue_mutex_);
        queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::filesystem::path snapshot_dir_;

  mutable std::shared_mutex scenes_mutex_;
  std::map<std::string, std::shared_ptr<const Scene>> scenes_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;

  std::mutex rng_mutex_;
  std::mt19937_64 rng_;

  mutable std::mutex jobs_mutex_;
  mutable std::condition_variable jobs_cv_;
  std::map<std::string, std::shared_ptr<EvaluationJob>> jobs_;
  std::uint64_t job_counter_ = 0;

  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace inspect
