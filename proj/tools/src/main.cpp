// hapsim command line: runs scripted scenarios, replays event logs through
// the signal chain, and decodes binary frame captures.
//
// Exit codes (keyed to the error taxonomy):
//   0  success
//   1  unexpected failure
//   2  invalid input: config/trajectory/event-log parse errors, bad
//      channels, out-of-range commands
//   3  file I/O failure
//   4  physics failure (unsupported shape pairing, numerical divergence)
//   5  frame capture contained undecodable frames
//   6  scenario protocol failure (never held / never slipped)
//   7  scenario timeout

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hapsim/errors.hpp"
#include "hapsim/protocol.hpp"
#include "hapsim/scenario.hpp"
#include "hapsim/trace.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitIo = 3;
constexpr int kExitPhysics = 4;
constexpr int kExitBadCapture = 5;
constexpr int kExitScenario = 6;
constexpr int kExitTimeout = 7;

int decode_capture(const std::string& path) {
  const auto records = hapsim::read_capture(path);
  hapsim::Reconstruction recon;
  int bad = 0;

  std::printf("# %zu records from %s\n", records.size(), path.c_str());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& [time, bytes] = records[i];
    const hapsim::DecodeResult result = hapsim::decode_frame(bytes);
    if (const auto* frame = std::get_if<hapsim::DecodedFrame>(&result)) {
      std::printf("[%9.4f] seq=%3u count=%zu", time, frame->seq,
                  frame->raw.size());
      for (const auto& [ch, raw] : frame->raw)
        std::printf("  ch%d=%5u (%.4f)", ch, raw, hapsim::dequantize(raw));
      std::printf("\n");
      recon.apply(*frame);
    } else {
      const auto& err = std::get<hapsim::DecodeError>(result);
      ++bad;
      std::printf("[%9.4f] record %zu: %s at offset %zu%s%s\n", time, i,
                  hapsim::to_string(err.kind), err.offset,
                  err.detail.empty() ? "" : ": ", err.detail.c_str());
    }
  }

  std::printf("# frames ok: %zu, bad: %d\n", records.size() - bad, bad);
  for (const auto& gap : recon.gaps)
    std::printf("# gap at frame %zu: expected seq %u, got %u (%d missing)\n",
                gap.frame_index, gap.expected, gap.got, gap.missing);
  std::printf("# final values:");
  for (int ch = 0; ch < hapsim::kChannelCount; ++ch)
    if (recon.seen[ch]) std::printf(" ch%d=%.4f", ch, recon.value[ch]);
  std::printf("\n");
  return bad > 0 ? kExitBadCapture : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"string-drive fingertip haptics simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string condition;
  std::uint64_t seed = 0;
  bool deterministic = false;
  bool realtime = false;

  CLI::App* run_cmd =
      app.add_subcommand("run", "run a scenario from a JSON config");
  run_cmd->add_option("config", config_path, "scenario config (JSON)")
      ->required();
  run_cmd->add_option("--out", out_dir, "directory for traces and metrics");
  CLI::Option* seed_opt =
      run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--condition", condition,
                      "override the haptic feedback condition");
  CLI::Option* det_opt = run_cmd->add_flag(
      "--deterministic", deterministic,
      "lockstep virtual clocks, no pacing (default)");
  run_cmd->add_flag("--realtime", realtime, "pace steps against the wall clock")
      ->excludes(det_opt);

  std::string log_path;
  std::string replay_out;
  std::string replay_config;
  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "re-render a recorded event log through synth and device");
  replay_cmd->add_option("event-log", log_path, "event log CSV")->required();
  replay_cmd->add_option("--out", replay_out, "directory for rendered traces");
  replay_cmd->add_option("--config", replay_config,
                         "scenario config supplying synth/motor/link settings");

  std::string capture_path;
  CLI::App* protocol_cmd =
      app.add_subcommand("protocol", "wire protocol utilities");
  protocol_cmd->require_subcommand(1);
  CLI::App* decode_cmd =
      protocol_cmd->add_subcommand("decode", "list the frames of a capture");
  decode_cmd->add_option("capture", capture_path, "binary capture file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      hapsim::ScenarioConfig cfg = hapsim::load_config(config_path);
      if (*seed_opt) cfg.seed = seed;
      if (!condition.empty())
        cfg.condition = hapsim::condition_from_string(condition);
      if (realtime) cfg.realtime = true;
      if (deterministic) cfg.realtime = false;
      hapsim::validate(cfg);
      const hapsim::RunOutput out = hapsim::run_scenario(cfg, out_dir);
      std::fputs(hapsim::metrics_to_json(out.metrics).c_str(), stdout);
      return 0;
    }
    if (*replay_cmd) {
      const std::vector<hapsim::HapticEvent> events =
          hapsim::load_event_log(log_path);
      hapsim::ScenarioConfig cfg =
          replay_config.empty()
              ? hapsim::default_config(hapsim::ScenarioKind::GraspMinForce)
              : hapsim::load_config(replay_config);
      const hapsim::RunOutput out =
          hapsim::replay_events(events, cfg, replay_out);
      std::fputs(hapsim::metrics_to_json(out.metrics).c_str(), stdout);
      return 0;
    }
    if (*decode_cmd) return decode_capture(capture_path);
  } catch (const hapsim::ParseError& e) {
    std::fprintf(stderr, "error (parse): %s\n", e.what());
    return kExitBadInput;
  } catch (const hapsim::NonMonotonicTimestamps& e) {
    std::fprintf(stderr, "error (timestamps): %s\n", e.what());
    return kExitBadInput;
  } catch (const hapsim::IoError& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
    return kExitIo;
  } catch (const hapsim::UnsupportedShapePair& e) {
    std::fprintf(stderr, "error (physics): %s\n", e.what());
    return kExitPhysics;
  } catch (const hapsim::NumericalDivergence& e) {
    std::fprintf(stderr, "error (physics): %s\n", e.what());
    return kExitPhysics;
  } catch (const hapsim::ControllerNeverHeld& e) {
    std::fprintf(stderr, "error (scenario): %s\n", e.what());
    return kExitScenario;
  } catch (const hapsim::NoSlipOccurred& e) {
    std::fprintf(stderr, "error (scenario): %s\n", e.what());
    return kExitScenario;
  } catch (const hapsim::Timeout& e) {
    std::fprintf(stderr, "error (timeout): %s\n", e.what());
    return kExitTimeout;
  } catch (const hapsim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
