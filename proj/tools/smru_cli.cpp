// SPDX-License-Identifier: Apache-2.0
//
// Operator CLI: process audio through the hybrid canceller, generate
// synthetic scenes, benchmark streaming throughput, report analytic
// complexity and create deterministic weight files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smru/smru.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

json finite_or_string(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  if (std::isnan(v)) return json("nan");
  return json(v);
}

double parse_db(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

void emit_error(const std::string& code, const std::string& message) {
  json err{{"error", {{"code", code}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

struct ModelHandle {
  smru::ModelConfig cfg;
  smru::WeightStore store;
  smru::CompiledModel model;
};

ModelHandle load_model(const std::string& preset, const std::string& weights_path,
                       uint64_t seed, bool no_postnet) {
  ModelHandle h;
  h.cfg = smru::make_preset(preset);
  h.cfg.postnet.enabled = !no_postnet;
  h.store = weights_path.empty() ? smru::init_weights(h.cfg, seed)
                                 : smru::load_weights_for(h.cfg, weights_path);
  h.model = smru::compile_model(h.cfg, h.store);
  return h;
}

// ---------------------------------------------------------------------------

int cmd_process(const std::string& mic_path, const std::string& far_path,
                const std::string& out_path, const std::string& weights_path,
                const std::string& preset, uint64_t seed, bool no_postnet, bool streaming,
                const std::string& target_path) {
  const smru::AudioBuffer mic = smru::read_wav(mic_path);
  const smru::AudioBuffer far = smru::read_wav(far_path);
  if (mic.samples.size() != far.samples.size())
    throw smru::FormatError("mic and far-end recordings must have equal length");
  if (mic.samples.size() < 320)
    throw smru::FormatError("input shorter than one analysis window (20 ms)");

  ModelHandle h = load_model(preset, weights_path, seed, no_postnet);
  const smru::StftConfig stft_cfg = smru::StftConfig::make_default();

  const auto t0 = std::chrono::steady_clock::now();
  smru::AudioBuffer enhanced;
  if (streaming) {
    enhanced = smru::run_streaming(h.model, mic, far, stft_cfg);
  } else {
    enhanced = smru::run_offline(h.model, mic, far, stft_cfg).enhanced;
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double wall_s = std::chrono::duration<double>(t1 - t0).count();

  for (float v : enhanced.samples)
    if (!std::isfinite(v)) throw smru::NumericError("non-finite sample in output");
  smru::write_wav(out_path, enhanced);

  json metrics;
  metrics["erle_db"] = finite_or_string(smru::erle(mic, enhanced));
  if (!target_path.empty()) {
    const smru::AudioBuffer target = smru::read_wav(target_path);
    if (target.samples.size() != mic.samples.size())
      throw smru::FormatError("target length must match the mic recording");
    metrics["si_snr_db"] = finite_or_string(smru::si_snr(enhanced, target));
    const auto est_spec = smru::stft(enhanced, stft_cfg);
    const auto tgt_spec = smru::stft(target, stft_cfg);
    const auto vad = smru::vad_from_signal(target, stft_cfg);
    smru::AudioBuffer echo_ref;
    echo_ref.samples.resize(mic.samples.size());
    for (std::size_t i = 0; i < mic.samples.size(); ++i)
      echo_ref.samples[i] = mic.samples[i] - target.samples[i];
    const auto echo_mask = smru::vad_from_signal(echo_ref, stft_cfg);
    const smru::LossWeights w;
    metrics["losses"] = {{"mae", smru::mae_loss(est_spec, tgt_spec)},
                         {"vad", smru::vad_loss(est_spec, vad, w.eps)},
                         {"echo", smru::echo_loss(est_spec, tgt_spec, echo_mask)},
                         {"total", smru::total_loss(est_spec, tgt_spec, vad, echo_mask, w)}};
  }

  json out{{"command", "process"},
           {"preset", h.cfg.preset_name},
           {"streaming", streaming},
           {"postnet", h.cfg.postnet.enabled},
           {"samples", mic.samples.size()},
           {"output", out_path},
           {"rtf", wall_s / mic.duration_s()},
           {"metrics", metrics}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

json scene_to_manifest_entry(const smru::SceneSpec& spec, const smru::Scene& scene,
                             const std::string& id, const json& files) {
  return json{{"id", id},
              {"seed", spec.seed},
              {"scenario", smru::scenario_name(spec.scenario)},
              {"ser_db", finite_or_string(spec.ser_db)},
              {"snr_db", finite_or_string(spec.snr_db)},
              {"duration_s", spec.duration_s},
              {"rir", {{"length_ms", spec.rir.length_ms}, {"t60_ms", spec.rir.t60_ms}}},
              {"measured_ser_db", finite_or_string(scene.measured_ser_db)},
              {"measured_snr_db", finite_or_string(scene.measured_snr_db)},
              {"files", files}};
}

int cmd_simulate(const std::string& spec_json, const std::string& out_dir, uint64_t seed,
                 double duration, const std::string& scenario_str, const std::string& ser_str,
                 const std::string& snr_str, int rir_ms, double t60_ms, int count) {
  std::vector<smru::SceneSpec> specs;
  if (!spec_json.empty()) {
    std::ifstream f(spec_json);
    if (!f) throw smru::FormatError("cannot open spec file '" + spec_json + "'");
    json root = json::parse(f, nullptr, true, true);
    const json scenes = root.is_array() ? root : root.at("scenes");
    for (const auto& s : scenes) {
      smru::SceneSpec spec;
      spec.seed = s.value("seed", 1ull);
      spec.duration_s = s.value("duration_s", 4.0);
      spec.scenario = smru::scenario_from_name(s.at("scenario").get<std::string>());
      if (s.contains("ser_db"))
        spec.ser_db = s["ser_db"].is_string() ? parse_db(s["ser_db"].get<std::string>())
                                              : s["ser_db"].get<double>();
      else
        spec.ser_db = spec.scenario == smru::Scenario::ST_NE
                          ? std::numeric_limits<double>::infinity()
                          : (spec.scenario == smru::Scenario::ST_FE
                                 ? -std::numeric_limits<double>::infinity()
                                 : 5.0);
      if (s.contains("snr_db"))
        spec.snr_db = s["snr_db"].is_string() ? parse_db(s["snr_db"].get<std::string>())
                                              : s["snr_db"].get<double>();
      if (s.contains("rir")) {
        spec.rir.length_ms = s["rir"].value("length_ms", 100);
        spec.rir.t60_ms = s["rir"].value("t60_ms", 60.0);
      }
      specs.push_back(spec);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      smru::SceneSpec spec;
      spec.seed = seed + static_cast<uint64_t>(i);
      spec.duration_s = duration;
      spec.scenario = smru::scenario_from_name(scenario_str);
      spec.ser_db = spec.scenario == smru::Scenario::ST_NE
                        ? std::numeric_limits<double>::infinity()
                        : (spec.scenario == smru::Scenario::ST_FE
                               ? -std::numeric_limits<double>::infinity()
                               : parse_db(ser_str));
      spec.snr_db = parse_db(snr_str);
      spec.rir.length_ms = rir_ms;
      spec.rir.t60_ms = t60_ms;
      specs.push_back(spec);
    }
  }

  json manifest{{"scenes", json::array()}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const smru::Scene scene = smru::mix_scene(specs[i]);
    char id[32];
    std::snprintf(id, sizeof(id), "scene%04zu", i);
    json files;
    const std::vector<std::pair<const char*, const smru::AudioBuffer*>> parts{
        {"mic", &scene.mic}, {"farend", &scene.farend}, {"nearend", &scene.nearend},
        {"echo", &scene.echo}};
    for (const auto& [name, buf] : parts) {
      const std::string path = out_dir + "/" + id + "_" + name + ".wav";
      smru::write_wav(path, *buf);
      files[name] = path;
    }
    manifest["scenes"].push_back(scene_to_manifest_entry(specs[i], scene, id, files));
  }
  const std::string manifest_path = out_dir + "/manifest.json";
  std::ofstream mf(manifest_path);
  if (!mf) throw smru::FormatError("cannot write '" + manifest_path + "'");
  mf << manifest.dump(2) << "\n";
  std::cout << manifest.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_bench(const std::string& preset, double seconds, uint64_t seed, bool no_postnet) {
  ModelHandle h = load_model(preset, "", seed, no_postnet);
  const smru::StftConfig stft_cfg = smru::StftConfig::make_default();

  smru::SceneSpec spec;
  spec.seed = seed;
  spec.duration_s = std::max(seconds, 1.0);
  spec.scenario = smru::Scenario::DT;
  spec.ser_db = 5.0;
  spec.snr_db = 15.0;
  const smru::Scene scene = smru::mix_scene(spec);

  const std::size_t hop = static_cast<std::size_t>(stft_cfg.hop);
  const std::size_t pushes = scene.mic.samples.size() / hop;
  smru::StreamState st = smru::stream_create(h.model, stft_cfg);

  const std::size_t warmup = std::min<std::size_t>(50, pushes / 4);
  std::vector<double> push_ms;
  push_ms.reserve(pushes);
  for (std::size_t b = 0; b < pushes; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)smru::stream_push(st, h.model, scene.mic.samples.data() + b * hop,
                            scene.farend.samples.data() + b * hop, hop);
    const auto t1 = std::chrono::steady_clock::now();
    if (b >= warmup)
      push_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (push_ms.empty()) throw smru::NumericError("bench: no timed pushes");
  double mean = 0.0;
  for (double v : push_ms) mean += v;
  mean /= static_cast<double>(push_ms.size());
  std::vector<double> sorted = push_ms;
  std::sort(sorted.begin(), sorted.end());
  const double p95 = sorted[static_cast<std::size_t>(0.95 * (sorted.size() - 1))];
  const double hop_ms = 1000.0 * hop / smru::kSampleRate;
  const double rtf = mean / hop_ms;

  json out{{"command", "bench"},
           {"preset", h.cfg.preset_name},
           {"postnet", h.cfg.postnet.enabled},
           {"seconds", seconds},
           {"pushes", push_ms.size()},
           {"push_ms_mean", mean},
           {"push_ms_p95", p95},
           {"rtf", rtf},
           {"realtime", rtf < 1.0}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

json macs_to_json(const smru::ComplexityReport& rep) {
  json modules = json::array();
  for (const auto& m : rep.modules)
    modules.push_back({{"name", m.name}, {"macs_per_s", m.macs_per_s}, {"params", m.params}});
  return json{{"command", "macs"},
              {"preset", rep.preset},
              {"embedding", rep.embedding},
              {"postnet", rep.postnet_enabled},
              {"modules", modules},
              {"total_macs_per_s", rep.total_macs_per_s},
              {"macs_per_frame", rep.macs_per_frame},
              {"params", rep.params}};
}

int cmd_macs(const std::string& preset, int embedding, bool no_postnet, bool as_json) {
  smru::ModelConfig cfg;
  if (embedding > 0) {
    cfg.embedding = embedding;
    cfg.preset_name = "custom";
  } else {
    cfg = smru::make_preset(preset.empty() ? "T" : preset);
  }
  cfg.postnet.enabled = !no_postnet;
  const smru::ComplexityReport rep = smru::count_macs(cfg);
  if (as_json) {
    std::cout << macs_to_json(rep).dump(2) << "\n";
    return kExitOk;
  }
  std::printf("preset %-7s E=%-4d postnet=%s\n", rep.preset.c_str(), rep.embedding,
              rep.postnet_enabled ? "on" : "off");
  std::printf("%-12s %14s %12s\n", "module", "MACs/s", "params");
  for (const auto& m : rep.modules)
    std::printf("%-12s %14.3e %12llu\n", m.name.c_str(), m.macs_per_s,
                static_cast<unsigned long long>(m.params));
  std::printf("%-12s %14.3e %12llu  (%.4f G/s)\n", "total", rep.total_macs_per_s,
              static_cast<unsigned long long>(rep.params), rep.total_macs_per_s / 1e9);
  return kExitOk;
}

int cmd_init_weights(const std::string& preset, uint64_t seed, const std::string& out,
                     bool no_postnet) {
  smru::ModelConfig cfg = smru::make_preset(preset);
  cfg.postnet.enabled = !no_postnet;
  const smru::WeightStore store = smru::init_weights(cfg, seed);
  smru::save_weights(store, out);
  json j{{"command", "init-weights"},
         {"preset", cfg.preset_name},
         {"seed", seed},
         {"out", out},
         {"tensors", store.size()},
         {"params", smru::parameter_count(cfg)}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMRU hybrid echo cancellation and noise suppression engine"};
  app.require_subcommand(1);

  // process
  auto* proc = app.add_subcommand("process", "run the full pipeline over WAV files");
  std::string mic_path, far_path, out_path, weights_path, target_path, preset = "T";
  uint64_t seed = 1;
  bool no_postnet = false, streaming = false;
  proc->add_option("--mic", mic_path, "microphone WAV (PCM16 mono 16 kHz)")->required();
  proc->add_option("--farend", far_path, "far-end reference WAV")->required();
  proc->add_option("--out", out_path, "enhanced output WAV")->required();
  proc->add_option("--weights", weights_path, "weight file (default: seeded init)");
  proc->add_option("--preset", preset, "model preset T|S|L|H");
  proc->add_option("--seed", seed, "weight seed when no file is given");
  proc->add_flag("--no-postnet", no_postnet, "disable the deep-filter postnet");
  proc->add_flag("--streaming", streaming, "use the frame-by-frame engine");
  proc->add_option("--target", target_path, "clean near-end WAV for metrics");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic scenes");
  std::string spec_json, out_dir, scenario = "DT", ser = "5", snr = "15";
  uint64_t sim_seed = 1;
  double duration = 4.0, t60 = 60.0;
  int rir_ms = 100, count = 1;
  sim->add_option("--spec-json", spec_json, "scene spec file (array or {scenes:[...]})");
  sim->add_option("--out-dir", out_dir, "output directory")->required();
  sim->add_option("--seed", sim_seed, "base seed");
  sim->add_option("--duration", duration, "scene length in seconds");
  sim->add_option("--scenario", scenario, "DT | ST-NE | ST-FE");
  sim->add_option("--ser", ser, "signal-to-echo ratio in dB (or inf/-inf)");
  sim->add_option("--snr", snr, "signal-to-noise ratio in dB (or inf)");
  sim->add_option("--rir-ms", rir_ms, "echo path length in ms");
  sim->add_option("--t60-ms", t60, "echo path decay T60 in ms");
  sim->add_option("--count", count, "number of scenes (seeds seed..seed+count-1)");

  // bench
  auto* bench = app.add_subcommand("bench", "measure streaming real-time factor");
  std::string bench_preset = "T";
  double bench_seconds = 10.0;
  uint64_t bench_seed = 1;
  bool bench_no_postnet = false;
  bench->add_option("--preset", bench_preset, "model preset T|S|L|H");
  bench->add_option("--seconds", bench_seconds, "audio length to stream");
  bench->add_option("--seed", bench_seed, "weight/scene seed");
  bench->add_flag("--no-postnet", bench_no_postnet, "disable the postnet");

  // macs
  auto* macs = app.add_subcommand("macs", "analytic complexity report");
  std::string macs_preset;
  int macs_embedding = 0;
  bool macs_no_postnet = false, macs_json = false;
  macs->add_option("--preset", macs_preset, "model preset T|S|L|H");
  macs->add_option("--embedding", macs_embedding, "explicit embedding dimension");
  macs->add_flag("--no-postnet", macs_no_postnet, "exclude the postnet");
  macs->add_flag("--json", macs_json, "emit JSON instead of the table");

  // init-weights
  auto* initw = app.add_subcommand("init-weights", "create a deterministic weight file");
  std::string iw_preset = "T", iw_out;
  uint64_t iw_seed = 1;
  bool iw_no_postnet = false;
  initw->add_option("--preset", iw_preset, "model preset T|S|L|H");
  initw->add_option("--seed", iw_seed, "init seed");
  initw->add_option("--out", iw_out, "output weight file")->required();
  initw->add_flag("--no-postnet", iw_no_postnet, "exclude postnet parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (proc->parsed())
      return cmd_process(mic_path, far_path, out_path, weights_path, preset, seed,
                         no_postnet, streaming, target_path);
    if (sim->parsed())
      return cmd_simulate(spec_json, out_dir, sim_seed, duration, scenario, ser, snr,
                          rir_ms, t60, count);
    if (bench->parsed()) return cmd_bench(bench_preset, bench_seconds, bench_seed,
                                          bench_no_postnet);
    if (macs->parsed()) return cmd_macs(macs_preset, macs_embedding, macs_no_postnet,
                                        macs_json);
    if (initw->parsed()) return cmd_init_weights(iw_preset, iw_seed, iw_out, iw_no_postnet);
  } catch (const smru::FormatError& e) {
    emit_error("format", e.what());
    return kExitFormat;
  } catch (const smru::NumericError& e) {
    emit_error("numeric", e.what());
    return kExitNumeric;
  } catch (const smru::ConfigError& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  } catch (const smru::ShapeError& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  } catch (const json::exception& e) {
    emit_error("format", e.what());
    return kExitFormat;
  } catch (const std::exception& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
