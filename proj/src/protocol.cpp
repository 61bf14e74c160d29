#include "securetag/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <random>

#include "securetag/errors.hpp"
#include "securetag/scica.hpp"

namespace securetag {

const char* frame_kind_name(FrameKind kind) {
    switch (kind) {
        case FrameKind::AssociationRequest: return "assoc_request";
        case FrameKind::PatternVerifyRequest: return "verify_request";
        case FrameKind::EmptyPacket: return "empty_packet";
        case FrameKind::AuthRequest: return "auth_request";
        case FrameKind::DeauthNotification: return "deauth_notification";
        case FrameKind::Challenge: return "challenge";
        case FrameKind::VerifyGrant: return "verify_grant";
        case FrameKind::VerifyReject: return "verify_reject";
        case FrameKind::DataPacket: return "data_packet";
    }
    return "unknown";
}

const char* session_phase_name(SessionPhase phase) {
    switch (phase) {
        case SessionPhase::Idle: return "idle";
        case SessionPhase::AwaitVerifyRequest: return "await_verify_request";
        case SessionPhase::SendingBurst: return "sending_burst";
        case SessionPhase::CollectingBurst: return "collecting_burst";
        case SessionPhase::Verifying: return "verifying";
        case SessionPhase::Associated: return "associated";
        case SessionPhase::Rejected: return "rejected";
        case SessionPhase::ChallengePending: return "challenge_pending";
    }
    return "unknown";
}

void AttackScript::validate() const {
    if (attacker_link.kind != LinkKind::OffBody)
        throw config_error("attacker link must be off-body");
    if (times.empty()) throw config_error("attack script needs at least one attempt time");
}

// ---------------------------------------------------------------------------
// Device state machine.

namespace {

int burst_length(double window_s, double sample_period_s) {
    return static_cast<int>(std::llround(window_s / sample_period_s));
}

StepResult device_begin_association(DeviceState& state) {
    StepResult res;
    state.pending_nonce = ++state.nonce_counter;
    state.sent_nonces.insert(state.pending_nonce);
    state.phase = SessionPhase::AwaitVerifyRequest;

    Frame assoc;
    assoc.kind = FrameKind::AssociationRequest;
    assoc.sender_claimed_id = state.config.id;
    assoc.nonce = state.pending_nonce;
    res.frames.push_back({assoc, 0.0});
    res.timers.push_back({TimerKind::AssocRetry, state.config.assoc_retry_s, state.pending_nonce, ""});
    return res;
}

StepResult device_emit_burst_packet(DeviceState& state) {
    StepResult res;
    if (state.burst_remaining <= 0) return res;
    Frame pkt;
    pkt.kind = FrameKind::EmptyPacket;
    pkt.sender_claimed_id = state.config.id;
    pkt.receiver = state.config.hub_id;
    pkt.nonce = state.pending_nonce;
    res.frames.push_back({pkt, 0.0});
    --state.burst_remaining;
    if (state.burst_remaining > 0) {
        res.timers.push_back(
            {TimerKind::BurstPacket, state.config.sample_period_s, state.pending_nonce, ""});
    } else {
        state.phase = SessionPhase::Verifying;
        res.timers.push_back(
            {TimerKind::VerifyTimeout, state.config.verify_timeout_s, state.pending_nonce, ""});
    }
    return res;
}

}  // namespace

StepResult device_step(DeviceState& state, const DeviceEvent& event) {
    StepResult res;
    const auto& cfg = state.config;

    switch (event.type) {
        case DeviceEvent::Type::Start:
            if (state.phase == SessionPhase::Idle) return device_begin_association(state);
            return res;

        case DeviceEvent::Type::Timer:
            switch (event.timer) {
                case TimerKind::AssocRetry:
                    if (state.challenge_pending) {
                        // The pending challenge re-verification is our way back
                        // to Associated; don't start a competing handshake.
                        res.timers.push_back(
                            {TimerKind::AssocRetry, cfg.assoc_retry_s, state.pending_nonce, ""});
                        return res;
                    }
                    if (state.phase == SessionPhase::AwaitVerifyRequest &&
                        state.pending_nonce == event.timer_nonce) {
                        // Request (or its answer) was lost; try again.
                        Frame assoc;
                        assoc.kind = FrameKind::AssociationRequest;
                        assoc.sender_claimed_id = cfg.id;
                        assoc.nonce = state.pending_nonce;
                        res.frames.push_back({assoc, 0.0});
                        res.timers.push_back(
                            {TimerKind::AssocRetry, cfg.assoc_retry_s, state.pending_nonce, ""});
                    } else if (state.phase == SessionPhase::Idle ||
                               state.phase == SessionPhase::Rejected) {
                        return device_begin_association(state);
                    }
                    return res;
                case TimerKind::VerifyTimeout:
                    if (state.phase == SessionPhase::Verifying &&
                        state.pending_nonce == event.timer_nonce) {
                        state.phase = SessionPhase::Idle;
                        state.challenge_pending = false;
                        res.timers.push_back(
                            {TimerKind::AssocRetry, cfg.reject_backoff_s, state.pending_nonce, ""});
                    }
                    return res;
                case TimerKind::BurstPacket:
                    if (state.phase == SessionPhase::SendingBurst &&
                        state.pending_nonce == event.timer_nonce)
                        return device_emit_burst_packet(state);
                    return res;
                case TimerKind::DataTick:
                    if (state.phase == SessionPhase::Associated ||
                        state.phase == SessionPhase::ChallengePending) {
                        Frame pkt;
                        pkt.kind = FrameKind::DataPacket;
                        pkt.sender_claimed_id = cfg.id;
                        pkt.receiver = cfg.hub_id;
                        res.frames.push_back({pkt, 0.0});
                        res.timers.push_back({TimerKind::DataTick, cfg.sample_period_s, 0, ""});
                    }
                    return res;
                case TimerKind::ChallengeRetry:
                    if (state.challenge_pending && state.pending_nonce == event.timer_nonce &&
                        state.phase != SessionPhase::SendingBurst &&
                        state.phase != SessionPhase::Verifying) {
                        Frame challenge;
                        challenge.kind = FrameKind::Challenge;
                        challenge.sender_claimed_id = cfg.id;
                        challenge.receiver = cfg.hub_id;
                        challenge.nonce = state.pending_nonce;
                        res.frames.push_back({challenge, 0.0});
                        res.timers.push_back(
                            {TimerKind::ChallengeRetry, 3.0, state.pending_nonce, ""});
                    }
                    return res;
                case TimerKind::ChallengeReset:
                    if (state.challenge_pending && state.pending_nonce == event.timer_nonce) {
                        state.challenge_pending = false;
                        if (state.phase == SessionPhase::ChallengePending)
                            state.phase = SessionPhase::Associated;
                        else if (state.phase == SessionPhase::Idle ||
                                 state.phase == SessionPhase::Rejected)
                            res.timers.push_back({TimerKind::AssocRetry, 1.0, 0, ""});
                    }
                    return res;
                default:
                    return res;
            }

        case DeviceEvent::Type::Frame: {
            const Frame& f = event.frame;
            switch (f.kind) {
                case FrameKind::PatternVerifyRequest: {
                    const bool challenge_recovery =
                        state.challenge_pending && (state.phase == SessionPhase::Idle ||
                                                    state.phase == SessionPhase::Rejected);
                    if (f.receiver == cfg.id && f.nonce == state.pending_nonce &&
                        (state.phase == SessionPhase::AwaitVerifyRequest ||
                         state.phase == SessionPhase::ChallengePending || challenge_recovery)) {
                        state.phase = SessionPhase::SendingBurst;
                        state.burst_remaining = burst_length(cfg.window_s, cfg.sample_period_s);
                        return device_emit_burst_packet(state);
                    }
                    return res;
                }
                case FrameKind::VerifyGrant:
                    if (f.receiver == cfg.id && f.nonce == state.pending_nonce &&
                        state.phase == SessionPhase::Verifying) {
                        state.phase = SessionPhase::Associated;
                        state.consecutive_rejects = 0;
                        state.challenge_pending = false;
                        res.timers.push_back({TimerKind::DataTick, cfg.sample_period_s, 0, ""});
                    }
                    return res;
                case FrameKind::VerifyReject:
                    if (f.receiver == cfg.id && f.nonce == state.pending_nonce &&
                        state.phase == SessionPhase::Verifying) {
                        state.phase = SessionPhase::Rejected;
                        state.challenge_pending = false;
                        ++state.consecutive_rejects;
                        const double backoff =
                            cfg.reject_backoff_s *
                            static_cast<double>(1 << std::min(state.consecutive_rejects - 1, 4));
                        res.timers.push_back(
                            {TimerKind::AssocRetry, backoff, state.pending_nonce, ""});
                    }
                    return res;
                case FrameKind::AuthRequest:
                case FrameKind::DeauthNotification: {
                    // A frame claiming to be us that we never sent demands a
                    // channel re-check; one outstanding challenge at a time.
                    const bool own_claim = f.sender_claimed_id == cfg.id;
                    const bool self_sent = state.sent_nonces.count(f.nonce) > 0;
                    if (!own_claim || self_sent || state.challenge_pending) return res;
                    if (state.phase != SessionPhase::Associated &&
                        state.phase != SessionPhase::Idle &&
                        state.phase != SessionPhase::Rejected)
                        return res;
                    state.challenge_pending = true;
                    state.pending_nonce = ++state.nonce_counter;
                    state.sent_nonces.insert(state.pending_nonce);
                    if (state.phase == SessionPhase::Associated)
                        state.phase = SessionPhase::ChallengePending;
                    Frame challenge;
                    challenge.kind = FrameKind::Challenge;
                    challenge.sender_claimed_id = cfg.id;
                    challenge.receiver = cfg.hub_id;
                    challenge.nonce = state.pending_nonce;
                    res.frames.push_back({challenge, 0.0});
                    res.timers.push_back(
                        {TimerKind::ChallengeRetry, 3.0, state.pending_nonce, ""});
                    res.timers.push_back(
                        {TimerKind::ChallengeReset, 30.0, state.pending_nonce, ""});
                    return res;
                }
                default:
                    return res;
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Hub state machine.

namespace {

// Snap collected (t, rss) samples to a uniform grid anchored at the first
// sample; gaps are filled by linear interpolation, edges by the nearest
// value, and everything re-quantized to whole dBm.
std::vector<double> uniform_burst(const std::vector<std::pair<double, double>>& collected,
                                  double sample_period_s, int n_expected) {
    std::vector<double> grid(static_cast<std::size_t>(n_expected),
                             std::numeric_limits<double>::quiet_NaN());
    const double t0 = collected.front().first;
    for (const auto& [t, rss] : collected) {
        const auto slot = static_cast<std::ptrdiff_t>(std::llround((t - t0) / sample_period_s));
        if (slot >= 0 && slot < n_expected) grid[static_cast<std::size_t>(slot)] = rss;
    }

    std::ptrdiff_t prev = -1;
    for (std::ptrdiff_t i = 0; i < n_expected; ++i) {
        if (std::isnan(grid[static_cast<std::size_t>(i)])) continue;
        if (prev < 0) {
            for (std::ptrdiff_t j = 0; j < i; ++j)
                grid[static_cast<std::size_t>(j)] = grid[static_cast<std::size_t>(i)];
        } else if (i > prev + 1) {
            const double lo = grid[static_cast<std::size_t>(prev)];
            const double hi = grid[static_cast<std::size_t>(i)];
            for (std::ptrdiff_t j = prev + 1; j < i; ++j) {
                const double w = static_cast<double>(j - prev) / static_cast<double>(i - prev);
                grid[static_cast<std::size_t>(j)] = std::round(lo + w * (hi - lo));
            }
        }
        prev = i;
    }
    if (prev < 0) return {};
    for (std::ptrdiff_t j = prev + 1; j < n_expected; ++j)
        grid[static_cast<std::size_t>(j)] = grid[static_cast<std::size_t>(prev)];
    return grid;
}

std::string majority_origin(const std::map<std::string, std::size_t>& counts) {
    std::string best;
    std::size_t best_n = 0;
    for (const auto& [origin, n] : counts) {
        if (n > best_n) {
            best = origin;
            best_n = n;
        }
    }
    return best;
}

StepResult hub_start_collection(HubState& state, const Frame& f, double t, bool challenge) {
    StepResult res;
    state.phase = SessionPhase::AwaitVerifyRequest;
    state.collect_claimed = f.sender_claimed_id;
    state.collect_nonce = f.nonce;
    state.collect_start = t;
    state.collect_is_challenge = challenge;
    state.collect_initiator = f.origin_device;
    state.collected.clear();
    state.collect_origins.clear();
    // Any verification supersedes a pending deauthentication and reopens the
    // claimant's monitoring window.
    state.pending_deauth.erase(f.sender_claimed_id);
    state.monitor[f.sender_claimed_id].clear();
    state.monitor_origins[f.sender_claimed_id].clear();

    Frame req;
    req.kind = FrameKind::PatternVerifyRequest;
    req.sender_claimed_id = state.config.id;
    req.receiver = f.sender_claimed_id;
    req.nonce = f.nonce;
    res.frames.push_back({req, 0.0});
    res.timers.push_back({TimerKind::CollectDeadline,
                          state.config.window_s + state.config.collect_grace_s, f.nonce,
                          f.sender_claimed_id});
    return res;
}

StepResult hub_finish_verification(HubState& state, double t) {
    StepResult res;
    const auto& cfg = state.config;
    const int n_expected = burst_length(cfg.window_s, cfg.sample_period_s);

    state.phase = SessionPhase::Verifying;

    VerificationRecord record;
    record.t = t;
    record.claimed_id = state.collect_claimed;
    record.burst_origin = majority_origin(state.collect_origins);
    record.initiator_origin = state.collect_initiator;
    record.challenge_initiated = state.collect_is_challenge;
    record.n_samples = state.collected.size();

    if (state.collected.size() >= 2) {
        Segment segment;
        segment.values = uniform_burst(state.collected, cfg.sample_period_s, n_expected);
        segment.sample_rate_hz = 1.0 / cfg.sample_period_s;
        segment.origin = "burst:" + state.collect_claimed;
        record.decision = classify_segment(segment, cfg.profile, cfg.pipeline);
        record.granted = record.decision.label == BodyLabel::OnBody;
    } else {
        // Nothing usable arrived inside the window.
        record.decision.label = BodyLabel::OffBody;
        record.decision.degenerate = true;
        record.granted = false;
    }

    auto& session = state.sessions[state.collect_claimed];
    if (record.granted) {
        session = SessionPhase::Associated;
    } else if (state.collect_is_challenge || session != SessionPhase::Associated) {
        // Challenge verifications demote an associated claimant; a failed
        // association attempt never tears down an established session.
        session = SessionPhase::Rejected;
    }
    state.pending_deauth.erase(state.collect_claimed);

    Frame verdict;
    verdict.kind = record.granted ? FrameKind::VerifyGrant : FrameKind::VerifyReject;
    verdict.sender_claimed_id = cfg.id;
    verdict.receiver = state.collect_claimed;
    verdict.nonce = state.collect_nonce;
    res.frames.push_back({verdict, 0.0});

    state.verifications.push_back(record);
    state.phase = SessionPhase::Idle;
    return res;
}

}  // namespace

StepResult hub_step(HubState& state, const HubEvent& event) {
    StepResult res;
    const auto& cfg = state.config;

    if (event.type == HubEvent::Type::Timer) {
        switch (event.timer) {
            case TimerKind::CollectDeadline:
                if ((state.phase == SessionPhase::AwaitVerifyRequest ||
                     state.phase == SessionPhase::CollectingBurst) &&
                    state.collect_claimed == event.timer_claimed_id)
                    return hub_finish_verification(state, event.t);
                return res;
            case TimerKind::DeauthGrace: {
                const auto it = state.pending_deauth.find(event.timer_claimed_id);
                if (it != state.pending_deauth.end()) {
                    // No challenge arrived: the unprotected path honors the
                    // notification and tears the session down.
                    state.sessions[event.timer_claimed_id] = SessionPhase::Idle;
                    state.monitor[event.timer_claimed_id].clear();
                    state.monitor_origins[event.timer_claimed_id].clear();
                    state.pending_deauth.erase(it);
                }
                return res;
            }
            default:
                return res;
        }
    }

    const Frame& f = event.frame;

    // A claimant repeating the request of the collection we are already
    // waiting on lost our verification demand; re-issue it.
    const auto redemand = [&](FrameKind kind) -> bool {
        if (state.phase != SessionPhase::AwaitVerifyRequest) return false;
        if (f.sender_claimed_id != state.collect_claimed || f.nonce != state.collect_nonce)
            return false;
        if ((kind == FrameKind::Challenge) != state.collect_is_challenge) return false;
        Frame req;
        req.kind = FrameKind::PatternVerifyRequest;
        req.sender_claimed_id = state.config.id;
        req.receiver = f.sender_claimed_id;
        req.nonce = f.nonce;
        res.frames.push_back({req, 0.0});
        return true;
    };

    switch (f.kind) {
        case FrameKind::AssociationRequest:
            if (state.phase == SessionPhase::Idle)
                return hub_start_collection(state, f, event.t, false);
            if (redemand(FrameKind::AssociationRequest)) return res;
            state.dropped_frames.push_back("busy: assoc_request from " + f.sender_claimed_id);
            return res;

        case FrameKind::Challenge:
            if (state.phase == SessionPhase::Idle)
                return hub_start_collection(state, f, event.t, true);
            if (redemand(FrameKind::Challenge)) return res;
            state.dropped_frames.push_back("busy: challenge from " + f.sender_claimed_id);
            return res;

        case FrameKind::EmptyPacket:
            if ((state.phase == SessionPhase::AwaitVerifyRequest ||
                 state.phase == SessionPhase::CollectingBurst) &&
                f.sender_claimed_id == state.collect_claimed && f.nonce == state.collect_nonce) {
                state.phase = SessionPhase::CollectingBurst;
                state.collected.emplace_back(event.t, event.rss);
                ++state.collect_origins[f.origin_device];
            } else {
                state.dropped_frames.push_back("out-of-session empty_packet from " +
                                               f.sender_claimed_id);
            }
            return res;

        case FrameKind::DataPacket: {
            const auto it = state.sessions.find(f.sender_claimed_id);
            if (it == state.sessions.end() || it->second != SessionPhase::Associated) {
                state.dropped_frames.push_back("data_packet from unassociated " +
                                               f.sender_claimed_id);
                return res;
            }
            auto& window = state.monitor[f.sender_claimed_id];
            window.emplace_back(event.t, event.rss);
            ++state.monitor_origins[f.sender_claimed_id][f.origin_device];
            const int n_expected = burst_length(cfg.window_s, cfg.sample_period_s);
            if (static_cast<int>(window.size()) >= n_expected) {
                Segment segment;
                segment.values = uniform_burst(window, cfg.sample_period_s, n_expected);
                segment.sample_rate_hz = 1.0 / cfg.sample_period_s;
                segment.origin = "monitor:" + f.sender_claimed_id;
                VerificationRecord record;
                record.t = event.t;
                record.claimed_id = f.sender_claimed_id;
                record.burst_origin = majority_origin(state.monitor_origins[f.sender_claimed_id]);
                record.decision = classify_segment(segment, cfg.profile, cfg.pipeline);
                record.granted = record.decision.label == BodyLabel::OnBody;
                record.n_samples = window.size();
                state.monitor_decisions.push_back(record);
                window.clear();
                state.monitor_origins[f.sender_claimed_id].clear();
            }
            return res;
        }

        case FrameKind::AuthRequest:
        case FrameKind::DeauthNotification: {
            const auto it = state.sessions.find(f.sender_claimed_id);
            if (it != state.sessions.end() && it->second == SessionPhase::Associated &&
                !state.pending_deauth.count(f.sender_claimed_id)) {
                state.pending_deauth[f.sender_claimed_id] = event.t;
                res.timers.push_back(
                    {TimerKind::DeauthGrace, cfg.deauth_grace_s, f.nonce, f.sender_claimed_id});
            }
            return res;
        }

        default:
            return res;
    }
}

// ---------------------------------------------------------------------------
// Scenario engine.

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct QueuedEvent {
    double t = 0.0;
    std::uint64_t order = 0;
    enum class Kind { DeviceStart, Delivery, DeviceTimer, HubTimer, AttackerTimer } kind =
        Kind::DeviceStart;
    Frame frame;
    TimerKind timer = TimerKind::AssocRetry;
    std::uint64_t timer_nonce = 0;
    std::string timer_claimed;
    std::string target;  // receiving node for deliveries / timer owner
    int attack_index = -1;

    bool operator>(const QueuedEvent& other) const {
        if (t != other.t) return t > other.t;
        return order > other.order;
    }
};

struct AttackerRuntime {
    std::string id;
    std::string victim;
    AttackKind kind = AttackKind::AuthenticatedSpoofing;
    std::uint64_t nonce_counter = 0x8000;
    std::uint64_t attempt_nonce = 0;
    bool awaiting_verify = false;
    int burst_remaining = 0;
    int assoc_retries = 0;
    bool recorded_assoc = false;
    std::uint64_t recorded_nonce = 0;
};

class ScenarioEngine {
  public:
    explicit ScenarioEngine(const ScenarioSpec& spec) : spec_(spec) {
        spec_.device_link.validate();
        if (spec_.device_link.kind != LinkKind::OnBody)
            throw config_error("device link must be on-body");
        if (spec_.attack) spec_.attack->validate();

        loss_rng_ = std::mt19937_64(splitmix64(spec_.rng_seed ^ 0x6c6f7373ULL));

        device_.config.id = spec_.device_id;
        device_.config.hub_id = spec_.hub_id;
        device_.config.sample_period_s = spec_.device_link.sample_period_s;
        device_.config.window_s = spec_.pipeline.segment_interval_s;

        hub_.config.id = spec_.hub_id;
        hub_.config.sample_period_s = spec_.device_link.sample_period_s;
        hub_.config.window_s = spec_.pipeline.segment_interval_s;
        hub_.config.pipeline = spec_.pipeline;
        hub_.config.profile = spec_.profile;

        prepare_links();

        push_start(0.5);
        if (spec_.attack) {
            attacker_.id = spec_.attacker_id;
            attacker_.victim = spec_.device_id;
            attacker_.kind = spec_.attack->kind;
            for (std::size_t i = 0; i < spec_.attack->times.size(); ++i) {
                QueuedEvent ev;
                ev.t = spec_.attack->times[i];
                ev.kind = QueuedEvent::Kind::AttackerTimer;
                ev.attack_index = static_cast<int>(i);
                ev.target = "start";
                push(std::move(ev));
            }
        }
    }

    ScenarioOutcome run() {
        while (!queue_.empty()) {
            QueuedEvent ev = queue_.top();
            queue_.pop();
            if (ev.t > spec_.duration_s) continue;
            dispatch(ev);
        }
        return finalize();
    }

  private:
    void prepare_links() {
        const double sp = spec_.device_link.sample_period_s;
        const auto samples_for = [&](LinkSpec link, std::uint64_t salt) {
            link.sample_period_s = sp;
            link.duration_s = spec_.duration_s + 8.0 * sp;
            link.rng_seed = splitmix64(spec_.rng_seed ^ salt);
            return generate_trace(link).values;
        };
        device_hub_rss_ = samples_for(spec_.device_link, 0x6465761ULL);
        if (spec_.attack) {
            attacker_hub_rss_ = samples_for(spec_.attack->attacker_link, 0x61747431ULL);
            attacker_device_rss_ = samples_for(spec_.attack->attacker_link, 0x61747432ULL);
        }
    }

    double link_rss(const std::string& a, const std::string& b, double t) const {
        const std::vector<double>* trace = &device_hub_rss_;
        const bool has_attacker = (a == spec_.attacker_id || b == spec_.attacker_id);
        if (has_attacker) {
            const bool with_hub = (a == spec_.hub_id || b == spec_.hub_id);
            trace = with_hub ? &attacker_hub_rss_ : &attacker_device_rss_;
        }
        const double sp = spec_.device_link.sample_period_s;
        auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, std::llround(t / sp)));
        if (idx >= trace->size()) idx = trace->size() - 1;
        return (*trace)[idx];
    }

    void push(QueuedEvent ev) {
        ev.order = ++order_counter_;
        queue_.push(std::move(ev));
    }

    void push_start(double t) {
        QueuedEvent ev;
        ev.t = t;
        ev.kind = QueuedEvent::Kind::DeviceStart;
        push(std::move(ev));
    }

    bool jammed(const Frame& f, const std::string& receiver) const {
        if (!spec_.attack || spec_.attack->kind != AttackKind::JammingReplay) return false;
        if (f.origin_device != spec_.hub_id || receiver != spec_.device_id) return false;
        const auto& kinds = spec_.attack->jam_kinds;
        return std::find(kinds.begin(), kinds.end(), f.kind) != kinds.end();
    }

    void broadcast(Frame frame, const std::string& origin, double t, double delay) {
        frame.origin_device = origin;
        frame.seq = ++frame_seq_;
        const double t_air = t + delay;
        for (const std::string& node : node_order()) {
            if (node == origin) continue;
            if (jammed(frame, node)) continue;
            if (loss_dist_(loss_rng_) < spec_.frame_loss_prob) continue;
            QueuedEvent ev;
            ev.t = t_air + kPropagationDelay;
            ev.kind = QueuedEvent::Kind::Delivery;
            ev.frame = frame;
            ev.target = node;
            push(std::move(ev));
        }
    }

    std::vector<std::string> node_order() const {
        std::vector<std::string> nodes{spec_.hub_id, spec_.device_id};
        if (spec_.attack) nodes.push_back(spec_.attacker_id);
        return nodes;
    }

    void apply_step(const StepResult& res, const std::string& origin, double t,
                    QueuedEvent::Kind timer_kind) {
        for (const auto& emit : res.frames) broadcast(emit.frame, origin, t, emit.delay_s);
        for (const auto& timer : res.timers) {
            QueuedEvent ev;
            ev.t = t + timer.delay_s;
            ev.kind = timer_kind;
            ev.timer = timer.kind;
            ev.timer_nonce = timer.nonce;
            ev.timer_claimed = timer.claimed_id;
            ev.target = origin;
            push(std::move(ev));
        }
    }

    void log_delivery(const QueuedEvent& ev, double rss, const std::string& state_name) {
        EventRecord rec;
        rec.t = ev.t;
        rec.origin = ev.frame.origin_device;
        rec.receiver = ev.target;
        rec.kind = ev.frame.kind;
        rec.claimed_id = ev.frame.sender_claimed_id;
        rec.rss = rss;
        rec.session_state = state_name;
        events_.push_back(std::move(rec));
    }

    void dispatch(const QueuedEvent& ev) {
        switch (ev.kind) {
            case QueuedEvent::Kind::DeviceStart: {
                DeviceEvent de;
                de.type = DeviceEvent::Type::Start;
                de.t = ev.t;
                apply_step(device_step(device_, de), spec_.device_id, ev.t,
                           QueuedEvent::Kind::DeviceTimer);
                return;
            }
            case QueuedEvent::Kind::DeviceTimer: {
                DeviceEvent de;
                de.type = DeviceEvent::Type::Timer;
                de.t = ev.t;
                de.timer = ev.timer;
                de.timer_nonce = ev.timer_nonce;
                apply_step(device_step(device_, de), spec_.device_id, ev.t,
                           QueuedEvent::Kind::DeviceTimer);
                return;
            }
            case QueuedEvent::Kind::HubTimer: {
                HubEvent he;
                he.type = HubEvent::Type::Timer;
                he.t = ev.t;
                he.timer = ev.timer;
                he.timer_claimed_id = ev.timer_claimed;
                apply_step(hub_step(hub_, he), spec_.hub_id, ev.t, QueuedEvent::Kind::HubTimer);
                return;
            }
            case QueuedEvent::Kind::AttackerTimer:
                dispatch_attacker(ev);
                return;
            case QueuedEvent::Kind::Delivery: {
                const double rss = link_rss(ev.frame.origin_device, ev.target, ev.t);
                if (ev.target == spec_.hub_id) {
                    HubEvent he;
                    he.type = HubEvent::Type::Frame;
                    he.t = ev.t;
                    he.frame = ev.frame;
                    he.rss = rss;
                    apply_step(hub_step(hub_, he), spec_.hub_id, ev.t, QueuedEvent::Kind::HubTimer);
                    log_delivery(ev, rss, session_phase_name(hub_.phase));
                } else if (ev.target == spec_.device_id) {
                    if (is_injected_attack_frame(ev.frame)) note_attack_delivery(ev.frame.seq);
                    DeviceEvent de;
                    de.type = DeviceEvent::Type::Frame;
                    de.t = ev.t;
                    de.frame = ev.frame;
                    apply_step(device_step(device_, de), spec_.device_id, ev.t,
                               QueuedEvent::Kind::DeviceTimer);
                    log_delivery(ev, rss, session_phase_name(device_.phase));
                } else {
                    attacker_observe(ev, rss);
                    log_delivery(ev, rss, "attacker");
                }
                return;
            }
        }
    }

    bool is_injected_attack_frame(const Frame& f) const {
        return spec_.attack && spec_.attack->kind == AttackKind::DeadlockInjection &&
               f.origin_device == spec_.attacker_id &&
               (f.kind == FrameKind::AuthRequest || f.kind == FrameKind::DeauthNotification);
    }

    void note_attack_delivery(std::uint64_t seq) {
        if (counted_injections_.insert(seq).second) ++deadlock_attempts_;
    }

    void dispatch_attacker(const QueuedEvent& ev) {
        if (!spec_.attack) return;
        const double t = ev.t;

        if (ev.target == "start") {
            switch (attacker_.kind) {
                case AttackKind::AuthenticatedSpoofing:
                    start_spoof_attempt(t, attacker_.nonce_counter++);
                    return;
                case AttackKind::JammingReplay:
                    if (!attacker_.recorded_assoc) return;  // nothing captured yet
                    start_spoof_attempt(t, attacker_.recorded_nonce);
                    return;
                case AttackKind::DeadlockInjection: {
                    Frame inject;
                    inject.kind = spec_.attack->injection_kind;
                    inject.sender_claimed_id = attacker_.victim;
                    inject.nonce = attacker_.nonce_counter++;
                    broadcast(inject, attacker_.id, t, 0.0);
                    return;
                }
            }
            return;
        }

        if (ev.target == "retry") {
            // Claimant-side persistence: re-send the association request until
            // the hub has a free verification slot.
            if (attacker_.awaiting_verify && attacker_.burst_remaining == 0 &&
                attacker_.assoc_retries < 20) {
                ++attacker_.assoc_retries;
                send_attacker_assoc(t);
            }
            return;
        }

        if (ev.target == "burst" && attacker_.burst_remaining > 0) {
            Frame pkt;
            pkt.kind = FrameKind::EmptyPacket;
            pkt.sender_claimed_id = attacker_.victim;
            pkt.receiver = spec_.hub_id;
            pkt.nonce = attacker_.attempt_nonce;
            broadcast(pkt, attacker_.id, t, 0.0);
            if (--attacker_.burst_remaining > 0) {
                QueuedEvent next;
                next.t = t + spec_.device_link.sample_period_s;
                next.kind = QueuedEvent::Kind::AttackerTimer;
                next.target = "burst";
                push(std::move(next));
            } else {
                attacker_.awaiting_verify = false;
            }
            return;
        }
    }

    void start_spoof_attempt(double t, std::uint64_t nonce) {
        attacker_.attempt_nonce = nonce;
        attacker_.awaiting_verify = true;
        attacker_.burst_remaining = 0;
        attacker_.assoc_retries = 0;
        send_attacker_assoc(t);
    }

    void send_attacker_assoc(double t) {
        Frame assoc;
        assoc.kind = FrameKind::AssociationRequest;
        assoc.sender_claimed_id = attacker_.victim;  // spoofed identity
        assoc.nonce = attacker_.attempt_nonce;
        broadcast(assoc, attacker_.id, t, 0.0);
        QueuedEvent retry;
        retry.t = t + 3.0;
        retry.kind = QueuedEvent::Kind::AttackerTimer;
        retry.target = "retry";
        push(std::move(retry));
    }

    void attacker_observe(const QueuedEvent& ev, double /*rss*/) {
        if (!spec_.attack) return;
        const Frame& f = ev.frame;

        if (attacker_.kind == AttackKind::JammingReplay && !attacker_.recorded_assoc &&
            f.kind == FrameKind::AssociationRequest && f.origin_device == spec_.device_id) {
            attacker_.recorded_assoc = true;
            attacker_.recorded_nonce = f.nonce;
        }

        if (attacker_.awaiting_verify && f.kind == FrameKind::PatternVerifyRequest &&
            f.origin_device == spec_.hub_id && f.receiver == attacker_.victim &&
            f.nonce == attacker_.attempt_nonce && attacker_.burst_remaining == 0) {
            attacker_.burst_remaining =
                burst_length(spec_.pipeline.segment_interval_s, spec_.device_link.sample_period_s);
            QueuedEvent burst;
            burst.t = ev.t;
            burst.kind = QueuedEvent::Kind::AttackerTimer;
            burst.target = "burst";
            push(std::move(burst));
        }
    }

    ScenarioOutcome finalize() {
        ScenarioOutcome outcome;
        outcome.events = std::move(events_);
        outcome.verifications = hub_.verifications;

        for (const auto& v : hub_.verifications) {
            if (v.granted && v.decision.label == BodyLabel::OffBody) outcome.safety_violated = true;
            if (v.initiator_origin == spec_.device_id && v.granted)
                outcome.association_succeeded = true;
            if (v.burst_origin == spec_.device_id && v.n_samples >= 2) {
                ++outcome.legit_segments;
                if (v.decision.label == BodyLabel::OffBody) ++outcome.legit_false_alarms;
            }
        }
        for (const auto& m : hub_.monitor_decisions) {
            if (m.granted && m.decision.label == BodyLabel::OffBody) outcome.safety_violated = true;
            if (m.burst_origin == spec_.device_id) {
                ++outcome.legit_segments;
                if (m.decision.label == BodyLabel::OffBody) ++outcome.legit_false_alarms;
            }
        }

        if (spec_.attack) {
            if (spec_.attack->kind == AttackKind::DeadlockInjection) {
                outcome.attack_attempts = deadlock_attempts_;
                // An injection is mitigated when the session survives it:
                // either its challenge re-verification passed, or the device
                // ends the run associated (no lasting denial of service).
                int retained = 0;
                for (const auto& v : hub_.verifications)
                    if (v.challenge_initiated && v.initiator_origin == spec_.device_id && v.granted)
                        ++retained;
                const auto it = hub_.sessions.find(spec_.device_id);
                const bool end_associated =
                    it != hub_.sessions.end() && it->second == SessionPhase::Associated;
                outcome.mitigated =
                    end_associated ? deadlock_attempts_ : std::min(retained, deadlock_attempts_);
            } else {
                for (const auto& v : hub_.verifications) {
                    if (v.initiator_origin != spec_.attacker_id) continue;
                    ++outcome.attack_attempts;
                    if (!v.granted) ++outcome.mitigated;
                }
            }
        }
        return outcome;
    }

    static constexpr double kPropagationDelay = 1e-3;

    ScenarioSpec spec_;
    DeviceState device_;
    HubState hub_;
    AttackerRuntime attacker_;
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
    std::uint64_t order_counter_ = 0;
    std::uint64_t frame_seq_ = 0;
    std::mt19937_64 loss_rng_;
    std::uniform_real_distribution<double> loss_dist_{0.0, 1.0};
    std::vector<double> device_hub_rss_;
    std::vector<double> attacker_hub_rss_;
    std::vector<double> attacker_device_rss_;
    std::vector<EventRecord> events_;
    int deadlock_attempts_ = 0;
    std::set<std::uint64_t> counted_injections_;
};

}  // namespace

ScenarioOutcome run_scenario(const ScenarioSpec& spec) {
    ScenarioEngine engine(spec);
    return engine.run();
}

Metrics compute_metrics(std::span<const ScenarioOutcome> outcomes) {
    if (outcomes.empty()) throw config_error("no scenario outcomes to aggregate");
    Metrics metrics;
    int mitigated = 0;
    int false_alarms = 0;
    for (const auto& o : outcomes) {
        metrics.n_attempts += o.attack_attempts;
        mitigated += o.mitigated;
        metrics.n_segments += o.legit_segments;
        false_alarms += o.legit_false_alarms;
    }
    if (metrics.n_attempts > 0)
        metrics.mitigation_rate = static_cast<double>(mitigated) / metrics.n_attempts;
    if (metrics.n_segments > 0)
        metrics.false_alarm_rate = static_cast<double>(false_alarms) / metrics.n_segments;
    return metrics;
}

void write_event_log(const ScenarioOutcome& outcome, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write event log: " + path.string());
    out << "t_s,origin,receiver,kind,claimed_id,rss_dbm,session_state\n";
    char buf[256];
    for (const auto& e : outcome.events) {
        std::snprintf(buf, sizeof(buf), "%.6f,%s,%s,%s,%s,%.17g,%s\n", e.t, e.origin.c_str(),
                      e.receiver.c_str(), frame_kind_name(e.kind), e.claimed_id.c_str(), e.rss,
                      e.session_state.c_str());
        out << buf;
    }
    if (!out) throw io_error("short write: " + path.string());
}

}  // namespace securetag
