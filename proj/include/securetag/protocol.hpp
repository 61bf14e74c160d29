#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "securetag/channel.hpp"
#include "securetag/classifier.hpp"

namespace securetag {

enum class FrameKind {
    AssociationRequest,
    PatternVerifyRequest,
    EmptyPacket,
    AuthRequest,
    DeauthNotification,
    Challenge,
    VerifyGrant,
    VerifyReject,
    DataPacket,
};

const char* frame_kind_name(FrameKind kind);

// A radio frame. `sender_claimed_id` is what the frame says; `origin_device`
// is ground truth visible only to the simulator and never to protocol logic.
struct Frame {
    FrameKind kind = FrameKind::DataPacket;
    std::string sender_claimed_id;
    std::string origin_device;
    std::string receiver;  // empty = broadcast
    std::uint64_t nonce = 0;
    std::uint64_t seq = 0;
};

enum class Role { IotDevice, LegitimateHub, Attacker };

enum class SessionPhase {
    Idle,
    AwaitVerifyRequest,
    SendingBurst,
    CollectingBurst,
    Verifying,
    Associated,
    Rejected,
    ChallengePending,
};

const char* session_phase_name(SessionPhase phase);

// An output of a state-machine step: a frame to send after `delay_s`.
struct Emit {
    Frame frame;
    double delay_s = 0.0;
};

enum class TimerKind {
    AssocRetry,      // device: no verify request answered our association
    VerifyTimeout,   // device: no verdict after the burst
    BurstPacket,     // device/attacker: next packet of the burst
    CollectDeadline, // hub: verification window closed
    DeauthGrace,     // hub: honor an unchallenged deauthentication
    DataTick,        // device: next data packet while associated
    ChallengeRetry,  // device: challenge (or its answer) was lost, re-send
    ChallengeReset,  // device: give up on an unanswered challenge
};

struct TimerRequest {
    TimerKind kind;
    double delay_s = 0.0;
    std::uint64_t nonce = 0;
    std::string claimed_id;
};

struct StepResult {
    std::vector<Emit> frames;
    std::vector<TimerRequest> timers;
};

// ---------------------------------------------------------------------------
// IoT device state machine.

struct DeviceConfig {
    std::string id = "device";
    std::string hub_id = "hub";
    double sample_period_s = 0.2;
    double window_s = 20.0;
    double assoc_retry_s = 3.0;
    double verify_timeout_s = 6.0;
    double reject_backoff_s = 5.0;  // doubled per consecutive reject
};

struct DeviceState {
    DeviceConfig config;
    Role role = Role::IotDevice;
    SessionPhase phase = SessionPhase::Idle;
    std::uint64_t pending_nonce = 0;
    std::uint64_t nonce_counter = 0;
    std::set<std::uint64_t> sent_nonces;
    bool challenge_pending = false;
    int consecutive_rejects = 0;
    int burst_remaining = 0;
};

struct DeviceEvent {
    enum class Type { Start, Frame, Timer };
    Type type = Type::Start;
    double t = 0.0;
    Frame frame;        // Type::Frame
    TimerKind timer = TimerKind::AssocRetry;
    std::uint64_t timer_nonce = 0;
};

// Device transition: association initiation, burst answering, challenge
// emission on foreign frames claiming this device's id.
StepResult device_step(DeviceState& state, const DeviceEvent& event);

// ---------------------------------------------------------------------------
// Hub state machine.

struct HubConfig {
    std::string id = "hub";
    double sample_period_s = 0.2;
    double window_s = 20.0;
    double collect_grace_s = 1.0;
    double deauth_grace_s = 5.0;
    PipelineConfig pipeline;
    CalibrationProfile profile;
};

// Outcome of one verification burst, with simulator-side ground truth.
struct VerificationRecord {
    double t = 0.0;
    std::string claimed_id;
    std::string burst_origin;      // majority ground-truth origin of the burst
    std::string initiator_origin;  // ground-truth origin of the frame that started it
    bool challenge_initiated = false;
    bool granted = false;
    Decision decision;
    std::size_t n_samples = 0;
};

struct HubState {
    HubConfig config;
    Role role = Role::LegitimateHub;
    SessionPhase phase = SessionPhase::Idle;  // verification slot
    std::string collect_claimed;
    std::uint64_t collect_nonce = 0;
    double collect_start = 0.0;
    bool collect_is_challenge = false;
    std::string collect_initiator;
    std::vector<std::pair<double, double>> collected;  // (t, rss_dbm)
    std::map<std::string, std::size_t> collect_origins;
    std::map<std::string, SessionPhase> sessions;  // claimed id -> Associated/Rejected
    std::map<std::string, double> pending_deauth;  // claimed id -> arrival time
    // Continuous monitoring of associated claimants (data packets).
    std::map<std::string, std::vector<std::pair<double, double>>> monitor;
    std::map<std::string, std::map<std::string, std::size_t>> monitor_origins;
    std::vector<VerificationRecord> verifications;
    std::vector<VerificationRecord> monitor_decisions;
    std::vector<std::string> dropped_frames;  // out-of-order frames, for the log
};

struct HubEvent {
    enum class Type { Frame, Timer };
    Type type = Type::Frame;
    double t = 0.0;
    Frame frame;
    double rss = 0.0;  // annotation of the delivered frame
    TimerKind timer = TimerKind::CollectDeadline;
    std::string timer_claimed_id;
};

// Hub transition: answers association requests with verification demands,
// collects bursts, classifies them, and grants or rejects. A claimant whose
// burst classifies off-body can never become Associated.
StepResult hub_step(HubState& state, const HubEvent& event);

// ---------------------------------------------------------------------------
// Scenario simulation.

enum class AttackKind { AuthenticatedSpoofing, JammingReplay, DeadlockInjection };

struct AttackScript {
    AttackKind kind = AttackKind::AuthenticatedSpoofing;
    LinkSpec attacker_link;                  // must be OffBody
    std::vector<double> times;               // attempt/injection schedule
    std::vector<FrameKind> jam_kinds = {FrameKind::VerifyGrant};
    FrameKind injection_kind = FrameKind::DeauthNotification;

    void validate() const;
};

struct ScenarioSpec {
    LinkSpec device_link;  // device <-> hub
    std::optional<AttackScript> attack;
    PipelineConfig pipeline;
    CalibrationProfile profile;
    double duration_s = 120.0;
    double frame_loss_prob = 0.01;
    std::uint64_t rng_seed = 1;
    std::string device_id = "device";
    std::string hub_id = "hub";
    std::string attacker_id = "attacker";
};

// One line of the scenario event log.
struct EventRecord {
    double t = 0.0;
    std::string origin;
    std::string receiver;
    FrameKind kind = FrameKind::DataPacket;
    std::string claimed_id;
    double rss = 0.0;
    std::string session_state;
};

struct ScenarioOutcome {
    int attack_attempts = 0;
    int mitigated = 0;
    int legit_segments = 0;
    int legit_false_alarms = 0;
    bool association_succeeded = false;
    bool safety_violated = false;
    std::vector<EventRecord> events;
    std::vector<VerificationRecord> verifications;
};

// Deterministic event-driven execution of one scenario.
ScenarioOutcome run_scenario(const ScenarioSpec& spec);

struct Metrics {
    std::optional<double> mitigation_rate;
    std::optional<double> false_alarm_rate;
    int n_attempts = 0;
    int n_segments = 0;
};

Metrics compute_metrics(std::span<const ScenarioOutcome> outcomes);

// `t_s,origin,receiver,kind,claimed_id,rss_dbm,session_state` per event.
void write_event_log(const ScenarioOutcome& outcome, const std::filesystem::path& path);

}  // namespace securetag
