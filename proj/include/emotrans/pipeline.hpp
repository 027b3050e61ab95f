#pragma once
// Offline pipeline: stage drivers behind the CLI. Each stage reads the
// artifacts of the previous one from the run directory and writes its own,
// so stages can be re-run individually. All randomness is derived from the
// configured seed; a stage re-run with the same config and inputs writes
// byte-identical outputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "attributes.hpp"
#include "audio.hpp"
#include "captions.hpp"
#include "clients.hpp"
#include "config.hpp"
#include "core.hpp"
#include "error.hpp"
#include "fallback_clients.hpp"
#include "http_clients.hpp"
#include "manifest.hpp"
#include "metrics.hpp"
#include "mtetr.hpp"
#include "planner.hpp"
#include "preprocess.hpp"
#include "rng.hpp"
#include "speech.hpp"
#include "version.hpp"

namespace emotrans {

// ---------------------------------------------------------------------------
// Client wiring
// ---------------------------------------------------------------------------

// One backend per role. Roles with a configured endpoint talk HTTP; the rest
// use the bundled synthetic backends. ASR has no synthetic fallback client
// here: without an endpoint the evaluation stage builds a per-utterance
// KnownTextAsrClient from the manifest transcript.
struct ClientSet {
  std::unique_ptr<TextGenClient> textgen;
  std::unique_ptr<TtsClient> tts;
  std::unique_ptr<SerClient> ser;
  std::unique_ptr<AsrClient> asr;  // may be null
  std::unique_ptr<EmbedderClient> embedder;
  std::unique_ptr<FeatureClient> feature;
  std::unique_ptr<CaptionClient> caption;
};

inline ClientSet make_clients(const PipelineConfig& cfg) {
  auto remote = [&](const EndpointConfig& e) { return !cfg.offline && !e.endpoint.empty(); };
  ClientSet s;
  if (remote(cfg.textgen))
    s.textgen = std::make_unique<HttpTextGenClient>(cfg.textgen);
  else
    s.textgen = std::make_unique<TemplateTextGenClient>();
  if (remote(cfg.tts))
    s.tts = std::make_unique<HttpTtsClient>(cfg.tts);
  else
    s.tts = std::make_unique<ToneTtsClient>(cfg.audio.sample_rate);
  if (remote(cfg.ser))
    s.ser = std::make_unique<HttpSerClient>(cfg.ser);
  else
    s.ser = std::make_unique<PitchSerClient>();
  if (remote(cfg.asr)) s.asr = std::make_unique<HttpAsrClient>(cfg.asr);
  if (remote(cfg.embedder))
    s.embedder = std::make_unique<HttpEmbedderClient>(cfg.embedder);
  else
    s.embedder = std::make_unique<SpectrumEmbedderClient>();
  if (remote(cfg.feature))
    s.feature = std::make_unique<HttpFeatureClient>(cfg.feature);
  else
    s.feature = std::make_unique<SpectrumFeatureClient>();
  if (remote(cfg.caption))
    s.caption = std::make_unique<HttpCaptionClient>(cfg.caption);
  else
    s.caption = std::make_unique<TemplateCaptionClient>();
  return s;
}

// ---------------------------------------------------------------------------
// Topics
// ---------------------------------------------------------------------------

// Mandarin counterpart of default_topic_hierarchy(). Chinese discourses embed
// the secondary topic verbatim in otherwise CJK sentences, so the topics
// themselves are CJK.
inline TopicHierarchy zh_topic_hierarchy() {
  TopicHierarchy h;
  h.primary = {"商业", "文化", "日常生活", "娱乐", "政治", "科学", "体育"};
  h.secondary["商业"] = {"新产品发布", "季度财报", "创业路演", "合同谈判", "市场低迷"};
  h.secondary["文化"] = {"博物馆特展", "民俗节庆", "一部新小说", "家传菜谱", "本地传统"};
  h.secondary["日常生活"] = {"早晨通勤", "社区野餐", "超市采购", "老屋翻新", "丢失的雨伞"};
  h.secondary["娱乐"] = {"大片首映", "音乐节", "选秀决赛", "新游戏发售", "明星访谈"};
  h.secondary["政治"] = {"竞选辩论", "新的市政条例", "预算表决", "市民听证会", "政策改革"};
  h.secondary["科学"] = {"探测器着陆", "疫苗试验", "聚变实验", "深海科考", "望远镜新发现"};
  h.secondary["体育"] = {"总决赛", "马拉松", "转会传闻", "爆冷获胜", "破纪录尝试"};
  return h;
}

inline const TopicHierarchy& topic_hierarchy_for(Language language) {
  static const TopicHierarchy en = default_topic_hierarchy();
  static const TopicHierarchy zh = zh_topic_hierarchy();
  return language == Language::kZh ? zh : en;
}

// ---------------------------------------------------------------------------
// Speaker roster
// ---------------------------------------------------------------------------

// Synthetic speakers are named spk-00, spk-01, ...; their demographic profile
// is roster metadata derived from the index, not an estimate.
inline std::string speaker_name(int index) {
  std::ostringstream os;
  os << "spk-" << std::setw(2) << std::setfill('0') << index;
  return os.str();
}

inline SpeakerProfile speaker_profile_for(const std::string& speaker_id) {
  std::size_t pos = speaker_id.find_last_not_of("0123456789");
  std::string digits = pos == std::string::npos ? speaker_id : speaker_id.substr(pos + 1);
  if (digits.empty())
    throw ValidationError("speaker profile: id '" + speaker_id + "' carries no index");
  int idx = std::stoi(digits);
  SpeakerProfile p;
  p.gender = idx % 2 == 0 ? Gender::kMale : Gender::kFemale;
  p.age_bucket = (idx / 2) % 2 == 0 ? AgeBucket::kYoungAdult : AgeBucket::kMiddleAged;
  return p;
}

// ---------------------------------------------------------------------------
// Run directory layout
// ---------------------------------------------------------------------------

struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path manifests;
  std::filesystem::path audio_dir;
  std::filesystem::path trimmed_dir;
  std::filesystem::path alignments;
  std::filesystem::path checkpoint;
  std::filesystem::path reports_dir;

  // Relative refs stored in artifacts resolve against the run root.
  std::filesystem::path resolve_ref(const std::string& ref) const {
    std::filesystem::path p(ref);
    return p.is_absolute() ? p : root / p;
  }
};

inline RunPaths resolve_run_paths(const PipelineConfig& cfg) {
  RunPaths rp;
  rp.root = cfg.run_dir;
  auto join = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : rp.root / fp;
  };
  rp.manifests = join(cfg.paths.manifests);
  rp.audio_dir = join(cfg.paths.audio_dir);
  rp.trimmed_dir = join(cfg.paths.trimmed_dir);
  rp.alignments = join(cfg.paths.alignments);
  rp.checkpoint = join(cfg.paths.checkpoint);
  rp.reports_dir = join(cfg.paths.reports_dir);
  return rp;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw FormatError("write to '" + path.string() + "' failed");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw FormatError("'" + path.string() + "' is not valid JSON");
  return j;
}

// Stored ref for an artifact under a configured directory; keeps refs
// relative whenever the configured directory is relative.
inline std::string ref_under(const std::string& dir, const std::string& file) {
  if (dir.empty()) return file;
  std::filesystem::path p(dir);
  return (p / file).generic_string();
}

inline Waveform slice_waveform(const Waveform& w, double start_s, double end_s) {
  auto idx = [&](double t) {
    long i = std::lround(t * w.sample_rate);
    return std::clamp<long>(i, 0, static_cast<long>(w.samples.size()));
  };
  long a = idx(start_s);
  long b = idx(end_s);
  if (b <= a)
    throw ConsistencyError("slice: empty audio span [" + std::to_string(start_s) + ", " +
                           std::to_string(end_s) + ")");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + a, w.samples.begin() + b);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Runs fn(0..total-1) on up to `parallelism` threads. Iteration order is
// unspecified under parallelism > 1, so callers gather results by index and
// write them out single-threaded. The first exception wins and is rethrown.
inline void parallel_for(std::size_t total, int parallelism,
                         const std::function<void(std::size_t)>& fn) {
  if (parallelism < 1) throw RangeError("parallel_for: parallelism must be >= 1");
  if (total == 0) return;
  std::size_t workers = std::min<std::size_t>(total, static_cast<std::size_t>(parallelism));
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::exception_ptr first_error;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= total || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Written by every stage: enough to reproduce the invocation.
inline void write_run_metadata(const RunPaths& rp, const PipelineConfig& cfg,
                               const std::string& command) {
  std::filesystem::create_directories(rp.root);
  nlohmann::json meta;
  meta["command"] = command;
  meta["config_hash"] = config_hash(cfg);
  meta["library_version"] = kVersion;
  detail::write_text_file(rp.root / "run.json", meta.dump(2) + "\n");
  detail::write_text_file(rp.root / "config.json", dump_config(cfg));
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanSummary {
  std::map<int, std::size_t> counts;  // transitions -> plan count
  std::size_t total = 0;
  std::filesystem::path path;
};

inline PlanSummary run_plan(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "plan");

  nlohmann::json doc;
  for (EmotionLabel e : all_emotions()) doc["emotions"].push_back(emotion_name(e));
  doc["max_transitions"] = cfg.dataset.max_transitions;

  PlanSummary sum;
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json plans = nlohmann::json::object();
  for (int k = 0; k <= cfg.dataset.max_transitions; ++k) {
    std::vector<TransitionPlan> enumerated = enumerate_transition_plans(k);
    sum.counts[k] = enumerated.size();
    sum.total += enumerated.size();
    counts[std::to_string(k)] = enumerated.size();
    nlohmann::json rows = nlohmann::json::array();
    for (const TransitionPlan& p : enumerated) {
      nlohmann::json row = nlohmann::json::array();
      for (EmotionLabel e : p.emotions) row.push_back(emotion_name(e));
      rows.push_back(std::move(row));
    }
    plans[std::to_string(k)] = std::move(rows);
  }
  doc["counts"] = std::move(counts);
  doc["total"] = sum.total;
  doc["plans"] = std::move(plans);

  sum.path = rp.root / "plans.json";
  detail::write_text_file(sum.path, doc.dump(2) + "\n");

  log << "plan: " << sum.total << " plan(s) for k <= " << cfg.dataset.max_transitions
      << " -> " << sum.path.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// build-dataset
// ---------------------------------------------------------------------------

struct BuildSummary {
  int requested = 0;
  int built = 0;
  std::vector<std::string> dropped;  // "id: reason"
};

inline BuildSummary run_build_dataset(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "build-dataset");
  std::filesystem::create_directories(rp.audio_dir);

  const std::vector<Language> languages = cfg.language_list();
  const std::uint64_t seed = *cfg.seed;
  std::vector<std::vector<TransitionPlan>> plans_by_k;
  for (int k = 0; k <= cfg.dataset.max_transitions; ++k)
    plans_by_k.push_back(enumerate_transition_plans(k));

  std::vector<std::string> speakers;
  for (int s = 0; s < cfg.dataset.speakers; ++s) speakers.push_back(speaker_name(s));
  const ReferenceCatalog catalog = default_reference_catalog(speakers);

  ClientSet clients = make_clients(cfg);

  struct Built {
    UtteranceManifest manifest;
    Waveform audio;
    std::string drop_reason;  // non-empty marks a dropped utterance
  };
  std::vector<Built> built(static_cast<std::size_t>(cfg.dataset.utterances));

  parallel_for(built.size(), cfg.parallelism, [&](std::size_t i) {
    Built& b = built[i];
    const std::uint64_t useed = mix_seed(mix_seed(seed, fnv1a("utterance")), i);
    std::ostringstream id_os;
    id_os << "utt-" << std::setw(4) << std::setfill('0') << (i + 1);
    const std::string id = id_os.str();

    const Language language = languages[i % languages.size()];
    const int k = static_cast<int>((i / languages.size()) %
                                   static_cast<std::size_t>(cfg.dataset.max_transitions + 1));

    Rng draws(mix_seed(useed, fnv1a("draws")));
    const auto topic = topic_hierarchy_for(language).pick(draws);
    const std::vector<TransitionPlan>& pool = plans_by_k[static_cast<std::size_t>(k)];
    const TransitionPlan plan = pool[draws.uniform_index(pool.size())];
    const std::string speaker = speakers[draws.uniform_index(speakers.size())];
    const auto perspective = static_cast<Perspective>(draws.uniform_index(3));

    GenerationRequest req;
    req.topic = topic;
    req.plan = plan;
    req.perspective = perspective;
    req.language = language;
    req.seed = mix_seed(useed, fnv1a("textgen"));
    std::vector<std::string> texts =
        generate_discourse(*clients.textgen, req, cfg.textgen_retry_limit);

    std::vector<Waveform> segments;
    try {
      for (std::size_t j = 0; j < texts.size(); ++j) {
        SynthesisResult r = synthesize_with_retry(
            *clients.tts, *clients.ser, texts[j], plan.emotions[j],
            select_reference(catalog, speaker, plan.emotions[j]),
            mix_seed(mix_seed(useed, fnv1a("tts")), j), cfg.synthesis.max_attempts);
        segments.push_back(std::move(r.audio));
      }
    } catch (const ConsistencyError& e) {
      b.drop_reason = e.what();
      return;
    }

    segments = normalize_loudness(segments);
    auto [audio, timed] = concatenate(segments, plan.emotions);
    if (cfg.audio.join_ramp_ms > 0)
      apply_join_ramps(audio, timed, cfg.audio.join_ramp_ms);

    UtteranceManifest m;
    m.id = id;
    m.language = language;
    m.speaker_id = speaker;
    m.plan = plan;
    for (std::size_t j = 0; j < texts.size(); ++j) {
      SentenceRecord s;
      s.text = texts[j];
      s.emotion = timed[j].emotion;
      s.start_s = timed[j].start_s;
      s.end_s = timed[j].end_s;
      m.sentences.push_back(std::move(s));
    }
    m.discourse_audio_ref = detail::ref_under(cfg.paths.audio_dir, id + ".wav");
    m.seed = static_cast<std::int64_t>(useed);
    m.validate();

    b.manifest = std::move(m);
    b.audio = std::move(audio);
  });

  BuildSummary sum;
  sum.requested = cfg.dataset.utterances;
  std::vector<UtteranceManifest> manifests;
  for (Built& b : built) {
    if (!b.drop_reason.empty()) {
      sum.dropped.push_back(b.drop_reason);
      log << "build-dataset: dropped utterance: " << b.drop_reason << "\n";
      continue;
    }
    save_wav(rp.resolve_ref(b.manifest.discourse_audio_ref).string(), b.audio);
    manifests.push_back(std::move(b.manifest));
  }
  sum.built = static_cast<int>(manifests.size());
  save_manifests(rp.manifests.string(), manifests);

  log << "build-dataset: built " << sum.built << "/" << sum.requested << " utterance(s) -> "
      << rp.manifests.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessSummary {
  int utterances = 0;
  double total_original_s = 0.0;
  double total_kept_s = 0.0;
};

inline PreprocessSummary run_preprocess(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "preprocess");
  std::filesystem::create_directories(rp.trimmed_dir);

  std::vector<UtteranceManifest> manifests = load_manifests(rp.manifests.string());
  if (manifests.empty())
    throw ValidationError("preprocess: manifest file lists no utterances");

  VadConfig vad;
  vad.frame_ms = cfg.vad.frame_ms;
  vad.aggressiveness = cfg.vad.aggressiveness;
  vad.window_frames = cfg.vad.window_frames;
  vad.trigger_ratio = cfg.vad.trigger_ratio;

  struct Row {
    nlohmann::json record;
    double original_s = 0.0;
    double kept_s = 0.0;
  };
  std::vector<Row> rows(manifests.size());

  parallel_for(manifests.size(), cfg.parallelism, [&](std::size_t i) {
    const UtteranceManifest& m = manifests[i];
    Waveform audio = load_wav(rp.resolve_ref(m.discourse_audio_ref).string());
    PreprocessResult r = preprocess_audio(audio, vad);
    std::string trimmed_ref = detail::ref_under(cfg.paths.trimmed_dir, m.id + ".wav");
    save_wav(rp.resolve_ref(trimmed_ref).string(), r.trimmed);

    nlohmann::json rec;
    rec["id"] = m.id;
    rec["trimmed_audio_ref"] = trimmed_ref;
    rec["trimmed_duration_s"] = r.trimmed.duration_s();
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& [a, b] : r.alignment.kept_spans) spans.push_back({a, b});
    rec["kept_spans"] = std::move(spans);
    nlohmann::json speech = nlohmann::json::array();
    for (const auto& [a, b] : r.speech_segments) speech.push_back({a, b});
    rec["speech_segments"] = std::move(speech);

    rows[i].record = std::move(rec);
    rows[i].original_s = audio.duration_s();
    rows[i].kept_s = r.trimmed.duration_s();
  });

  std::ostringstream os;
  PreprocessSummary sum;
  for (const Row& row : rows) {
    os << row.record.dump() << "\n";
    sum.total_original_s += row.original_s;
    sum.total_kept_s += row.kept_s;
  }
  sum.utterances = static_cast<int>(rows.size());
  detail::write_text_file(rp.alignments, os.str());

  log << "preprocess: trimmed " << sum.utterances << " utterance(s), kept " << std::fixed
      << std::setprecision(1) << sum.total_kept_s << "/" << sum.total_original_s << " s -> "
      << rp.alignments.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// Alignment lookup shared by train-mtetr and evaluate
// ---------------------------------------------------------------------------

struct AlignmentRecord {
  std::string trimmed_audio_ref;
  double trimmed_duration_s = 0.0;
  AlignmentMap map;
};

inline std::map<std::string, AlignmentRecord> load_alignment_records(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  std::map<std::string, AlignmentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw FormatError("'" + path.string() + "' line " + std::to_string(lineno) +
                        ": not a JSON object");
    AlignmentRecord rec;
    rec.trimmed_audio_ref = j.at("trimmed_audio_ref").get<std::string>();
    rec.trimmed_duration_s = j.at("trimmed_duration_s").get<double>();
    for (const auto& span : j.at("kept_spans"))
      rec.map.kept_spans.emplace_back(span.at(0).get<double>(), span.at(1).get<double>());
    rec.map.validate();
    out[j.at("id").get<std::string>()] = std::move(rec);
  }
  return out;
}

// Manifest segments carried onto the trimmed timeline. Throws when trimming
// swallowed a segment entirely, since the frame targets would then disagree
// with the stored plan.
inline std::vector<TimedSegment> segments_in_trimmed_domain(const UtteranceManifest& m,
                                                            const AlignmentRecord& rec) {
  std::vector<TimedSegment> out;
  const auto source = m.segments();
  for (std::size_t i = 0; i < source.size(); ++i) {
    TimedSegment s;
    s.start_s = map_to_trimmed(rec.map, source[i].start_s);
    s.end_s = i + 1 == source.size() ? rec.trimmed_duration_s
                                     : map_to_trimmed(rec.map, source[i].end_s);
    s.emotion = source[i].emotion;
    if (!(s.end_s - s.start_s > 1e-9))
      throw ConsistencyError("manifest '" + m.id + "': segment " + std::to_string(i) +
                             " was removed entirely by silence trimming");
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// train-mtetr
// ---------------------------------------------------------------------------

struct TrainSummary {
  int utterances = 0;
  int epochs = 0;
  double final_loss = 0.0;
  std::filesystem::path checkpoint;
};

inline TrainSummary run_train_mtetr(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "train-mtetr");

  std::vector<UtteranceManifest> manifests = load_manifests(rp.manifests.string());
  if (manifests.empty())
    throw ValidationError("train-mtetr: manifest file lists no utterances");
  auto alignments = load_alignment_records(rp.alignments);

  ClientSet clients = make_clients(cfg);
  std::vector<TrainSample> samples(manifests.size());
  parallel_for(manifests.size(), cfg.parallelism, [&](std::size_t i) {
    const UtteranceManifest& m = manifests[i];
    auto it = alignments.find(m.id);
    if (it == alignments.end())
      throw ConsistencyError("train-mtetr: no alignment record for '" + m.id + "'");
    Waveform trimmed = load_wav(rp.resolve_ref(it->second.trimmed_audio_ref).string());
    FeatureSequence features = clients.feature->extract(trimmed);
    features.validate();
    FrameTargets targets = make_frame_targets(segments_in_trimmed_domain(m, it->second),
                                              features.frame_rate, features.num_frames());
    samples[i] = TrainSample{std::move(features), std::move(targets)};
  });

  ModelConfig mc = cfg.mtetr.reduced ? ModelConfig::reduced() : ModelConfig();
  mc.in_planes = static_cast<int>(samples.front().features.dim());
  MtetrModel<double> model(mc, mix_seed(*cfg.seed, fnv1a("mtetr-init")));

  TrainConfig tc;
  tc.epochs = cfg.mtetr.epochs;
  tc.lr = cfg.mtetr.lr;
  tc.seed = mix_seed(*cfg.seed, fnv1a("train"));
  TrainResult result = train(model, samples, tc);

  save_checkpoint_file(rp.checkpoint.string(), model);
  nlohmann::json losses;
  losses["loss_history"] = result.loss_history;
  losses["dia_loss_history"] = result.dia_loss_history;
  losses["det_loss_history"] = result.det_loss_history;
  detail::write_text_file(rp.reports_dir / "loss_log.json", losses.dump(2) + "\n");

  TrainSummary sum;
  sum.utterances = static_cast<int>(samples.size());
  sum.epochs = tc.epochs;
  sum.final_loss = result.loss_history.back();
  sum.checkpoint = rp.checkpoint;
  log << "train-mtetr: " << sum.utterances << " sample(s), " << sum.epochs
      << " epoch(s), final loss " << std::setprecision(6) << sum.final_loss << " -> "
      << rp.checkpoint.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

struct AnnotateSummary {
  int utterances = 0;
  std::map<std::string, std::pair<double, double>> energy_thresholds;  // language -> lo, hi
};

inline AnnotateSummary run_annotate(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "annotate");

  std::vector<UtteranceManifest> manifests = load_manifests(rp.manifests.string());
  if (manifests.empty())
    throw ValidationError("annotate: manifest file lists no utterances");

  ClientSet clients = make_clients(cfg);

  std::vector<std::vector<SegmentAnalysis>> analyses(manifests.size());
  parallel_for(manifests.size(), cfg.parallelism, [&](std::size_t i) {
    const UtteranceManifest& m = manifests[i];
    Waveform audio = load_wav(rp.resolve_ref(m.discourse_audio_ref).string());
    std::vector<SegmentAnalysis> rows;
    for (const SentenceRecord& s : m.sentences) {
      SegmentAnalysis a = analyze_segment(detail::slice_waveform(audio, s.start_s, s.end_s),
                                          s.text, m.language);
      a.start_s = s.start_s;
      a.end_s = s.end_s;
      a.emotion = s.emotion;
      rows.push_back(std::move(a));
    }
    analyses[i] = std::move(rows);
  });

  // Energy thresholds come from corpus tertiles per language when there is
  // enough data; sparse or degenerate cases keep the configured bounds.
  AnnotateSummary sum;
  std::map<Language, AttributeThresholds> thresholds;
  for (Language lang : cfg.language_list()) thresholds[lang] = cfg.attributes.thresholds;
  if (cfg.attributes.energy_mode == "tertiles") {
    std::map<Language, std::vector<double>> energies;
    for (std::size_t i = 0; i < manifests.size(); ++i)
      for (const SegmentAnalysis& a : analyses[i])
        energies[manifests[i].language].push_back(a.energy_db);
    for (auto& [lang, values] : energies) {
      if (values.size() < 3) continue;
      auto [lo, hi] = energy_tertiles(values);
      if (!(lo < hi)) continue;
      thresholds[lang].energy_low_db = lo;
      thresholds[lang].energy_high_db = hi;
      sum.energy_thresholds[language_code(lang)] = {lo, hi};
    }
  }

  const std::uint64_t caption_seed = mix_seed(*cfg.seed, fnv1a("caption"));
  parallel_for(manifests.size(), cfg.parallelism, [&](std::size_t i) {
    UtteranceManifest& m = manifests[i];
    AttributeSequence attrs =
        build_attribute_sequence(m, analyses[i], speaker_profile_for(m.speaker_id),
                                 thresholds.at(m.language));
    m.captions = compose_caption_record(*clients.caption, attrs, m.language,
                                        mix_seed(caption_seed, i), cfg.captioning.max_attempts);
    m.attributes = std::move(attrs);
    m.validate();
  });

  save_manifests(rp.manifests.string(), manifests);
  sum.utterances = static_cast<int>(manifests.size());
  log << "annotate: captioned " << sum.utterances << " utterance(s) -> "
      << rp.manifests.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateSummary {
  int utterances = 0;
  double acc_etc_percent = 0.0;
  std::optional<double> acc_ett_percent;
  double fea_percent = 0.0;
  std::optional<double> eer_mean_percent;
  std::map<int, double> ees_percent_by_k;
  std::filesystem::path report;
};

inline EvaluateSummary run_evaluate(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "evaluate");

  std::vector<UtteranceManifest> manifests = load_manifests(rp.manifests.string());
  if (manifests.empty())
    throw ValidationError("evaluate: manifest file lists no utterances");
  auto alignments = load_alignment_records(rp.alignments);
  MtetrModel<double> model = load_checkpoint_file<double>(rp.checkpoint.string());

  ClientSet clients = make_clients(cfg);
  SmoothingConfig smoothing;
  smoothing.median_frames = cfg.mtetr.median_frames;
  smoothing.min_segment_s = cfg.mtetr.min_segment_s;

  struct Row {
    EvalPair pair;
    std::vector<int> pred_dia;
    std::vector<int> true_dia;
    std::optional<EerPoint> eer;
    std::optional<double> ees;
  };
  std::vector<Row> rows(manifests.size());

  parallel_for(manifests.size(), cfg.parallelism, [&](std::size_t i) {
    const UtteranceManifest& m = manifests[i];
    Row& row = rows[i];
    auto it = alignments.find(m.id);
    if (it == alignments.end())
      throw ConsistencyError("evaluate: no alignment record for '" + m.id + "'");

    Waveform trimmed = load_wav(rp.resolve_ref(it->second.trimmed_audio_ref).string());
    FeatureSequence features = clients.feature->extract(trimmed);
    features.validate();
    MtetrOutput<double> out = model.forward(features);

    std::vector<TimedSegment> decoded = decode(out.dia_logits, features.frame_rate, smoothing);
    std::vector<EmotionLabel> emotions;
    for (const TimedSegment& s : decoded) emotions.push_back(s.emotion);
    row.pair.predicted_plan = TransitionPlan{collapse_adjacent(emotions)};
    row.pair.true_plan = m.plan;
    row.pair.k = m.plan.transition_count();

    FrameTargets truth = make_frame_targets(segments_in_trimmed_domain(m, it->second),
                                            features.frame_rate, features.num_frames());
    row.true_dia = truth.dia;
    row.pred_dia.resize(static_cast<std::size_t>(out.dia_logits.rows()));
    for (Eigen::Index t = 0; t < out.dia_logits.rows(); ++t) {
      Eigen::Index best = 0;
      out.dia_logits.row(t).maxCoeff(&best);
      row.pred_dia[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }

    FrameTargets boundary = make_frame_targets(segments_in_trimmed_domain(m, it->second),
                                               features.frame_rate, features.num_frames(), 0);
    std::vector<double> det_scores(static_cast<std::size_t>(out.det_logits.rows()));
    for (Eigen::Index t = 0; t < out.det_logits.rows(); ++t)
      det_scores[static_cast<std::size_t>(t)] = detail::sigmoid(out.det_logits(t, 0));
    row.eer = eer(det_scores, boundary.det, cfg.mtetr.eer_tolerance_frames);

    if (m.plan.transition_count() >= 1) {
      Waveform original = load_wav(rp.resolve_ref(m.discourse_audio_ref).string());
      const auto segs = m.segments();
      std::vector<std::string> texts(segs.size());
      std::size_t cursor = 0;
      for (const SentenceRecord& s : m.sentences) {
        while (cursor + 1 < segs.size() && s.start_s >= segs[cursor].end_s - 1e-9) ++cursor;
        if (!texts[cursor].empty()) texts[cursor] += " ";
        texts[cursor] += s.text;
      }
      std::vector<EmbeddingVector> truth_embeddings;
      for (const TimedSegment& s : segs)
        truth_embeddings.push_back(
            clients.embedder->embed(detail::slice_waveform(original, s.start_s, s.end_s)));
      std::unique_ptr<AsrClient> local_asr;
      AsrClient* asr = clients.asr.get();
      if (!asr) {
        std::string joined;
        for (const std::string& t : texts) {
          if (!joined.empty()) joined += " ";
          joined += t;
        }
        local_asr = std::make_unique<KnownTextAsrClient>(joined);
        asr = local_asr.get();
      }
      row.ees = ees(original, texts, *asr, *clients.embedder, truth_embeddings);
    }
  });

  std::vector<EvalPair> pairs;
  std::vector<int> pred_pool, true_pool;
  std::vector<double> eer_values;
  std::map<int, std::vector<double>> ees_by_k;
  for (const Row& row : rows) {
    pairs.push_back(row.pair);
    pred_pool.insert(pred_pool.end(), row.pred_dia.begin(), row.pred_dia.end());
    true_pool.insert(true_pool.end(), row.true_dia.begin(), row.true_dia.end());
    if (row.eer) eer_values.push_back(row.eer->eer_percent);
    if (row.ees) ees_by_k[row.pair.k].push_back(*row.ees);
  }

  EvaluateSummary sum;
  sum.utterances = static_cast<int>(rows.size());
  sum.acc_etc_percent = acc_etc(pairs);
  sum.acc_ett_percent = acc_ett(pairs);
  sum.fea_percent = fea(pred_pool, true_pool);
  if (!eer_values.empty()) {
    double acc = 0.0;
    for (double v : eer_values) acc += v;
    sum.eer_mean_percent = acc / static_cast<double>(eer_values.size());
  }

  nlohmann::json report;
  report["utterances"] = sum.utterances;
  report["acc_etc"] = sum.acc_etc_percent;
  nlohmann::json by_k = nlohmann::json::object();
  for (const auto& [k, value] : acc_etc_by_k(pairs)) by_k[std::to_string(k)] = value;
  report["acc_etc_by_k"] = std::move(by_k);
  if (sum.acc_ett_percent)
    report["acc_ett"] = *sum.acc_ett_percent;
  else
    report["acc_ett"] = nullptr;
  report["acc_exact_sequence"] = acc_exact_sequence(pairs);
  report["fea"] = sum.fea_percent;
  if (sum.eer_mean_percent) {
    report["eer"] = {{"mean_percent", *sum.eer_mean_percent},
                     {"utterances", eer_values.size()}};
  } else {
    report["eer"] = nullptr;
  }
  nlohmann::json ees_json = nlohmann::json::object();
  std::vector<double> ees_all;
  for (const auto& [k, values] : ees_by_k) {
    sum.ees_percent_by_k[k] = ees_mean_percent(values);
    ees_json[std::to_string(k)] = sum.ees_percent_by_k[k];
    ees_all.insert(ees_all.end(), values.begin(), values.end());
  }
  report["ees_percent_by_k"] = std::move(ees_json);
  if (ees_all.empty())
    report["ees_percent_overall"] = nullptr;
  else
    report["ees_percent_overall"] = ees_mean_percent(ees_all);

  sum.report = rp.reports_dir / "metrics.json";
  detail::write_text_file(sum.report, report.dump(2) + "\n");

  log << "evaluate: " << sum.utterances << " utterance(s), Acc_ETC " << std::fixed
      << std::setprecision(1) << sum.acc_etc_percent << "%, FEA " << sum.fea_percent
      << "% -> " << sum.report.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

namespace detail {

inline std::string transitions_label(int k) {
  switch (k) {
    case 0: return "w/o Trans";
    case 1: return "One Trans";
    case 2: return "Two Trans";
    case 3: return "Three Trans";
    default: return std::to_string(k) + " Trans";
  }
}

}  // namespace detail

// Plain-text summary table: one column per (transition count, language) cell,
// one row per statistic. Cells without captions show "-" in caption rows.
inline std::string format_stats_table(const std::vector<StatsRow>& rows) {
  std::vector<std::string> headers{"Statistic"};
  for (const StatsRow& r : rows)
    headers.push_back(detail::transitions_label(r.transitions) +
                      (r.language == Language::kZh ? " ZH" : " EN"));

  std::vector<std::pair<std::string, std::function<std::string(const StatsRow&)>>> lines = {
      {"Utterances", [](const StatsRow& r) { return std::to_string(r.utterances); }},
      {"Words", [](const StatsRow& r) { return std::to_string(r.total_words); }},
      {"Max words per utterance",
       [](const StatsRow& r) { return std::to_string(r.max_words); }},
      {"Min words per utterance",
       [](const StatsRow& r) { return std::to_string(r.min_words); }},
      {"Mean words per utterance",
       [](const StatsRow& r) { return detail::fmt_fixed(r.mean_words, 1); }},
      {"Duration (h)",
       [](const StatsRow& r) { return detail::fmt_fixed(r.total_duration_s / 3600.0, 3); }},
      {"Max utterance duration (s)",
       [](const StatsRow& r) { return detail::fmt_fixed(r.max_duration_s, 2); }},
      {"Min utterance duration (s)",
       [](const StatsRow& r) { return detail::fmt_fixed(r.min_duration_s, 2); }},
      {"Mean utterance duration (s)",
       [](const StatsRow& r) { return detail::fmt_fixed(r.mean_duration_s, 2); }},
      {"Max caption length (V_I)",
       [](const StatsRow& r) {
         return r.vi.counted ? std::to_string(r.vi.max_words) : std::string("-");
       }},
      {"Min caption length (V_I)",
       [](const StatsRow& r) {
         return r.vi.counted ? std::to_string(r.vi.min_words) : std::string("-");
       }},
      {"Mean caption length (V_I)",
       [](const StatsRow& r) {
         return r.vi.counted ? detail::fmt_fixed(r.vi.mean_words, 1) : std::string("-");
       }},
      {"Max caption length (V_D)",
       [](const StatsRow& r) {
         return r.vd.counted ? std::to_string(r.vd.max_words) : std::string("-");
       }},
      {"Min caption length (V_D)",
       [](const StatsRow& r) {
         return r.vd.counted ? std::to_string(r.vd.min_words) : std::string("-");
       }},
      {"Mean caption length (V_D)",
       [](const StatsRow& r) {
         return r.vd.counted ? detail::fmt_fixed(r.vd.mean_words, 1) : std::string("-");
       }},
      {"Emotion Transitions", [](const StatsRow& r) { return std::to_string(r.distinct_plans); }},
      {"Speakers", [](const StatsRow& r) { return std::to_string(r.distinct_speakers); }},
  };

  std::vector<std::vector<std::string>> grid;
  grid.push_back(headers);
  for (const auto& [label, cell] : lines) {
    std::vector<std::string> line{label};
    for (const StatsRow& r : rows) line.push_back(cell(r));
    grid.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(grid.front().size(), 0);
  for (const auto& line : grid)
    for (std::size_t c = 0; c < line.size(); ++c)
      widths[c] = std::max(widths[c], line[c].size());

  std::ostringstream os;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    for (std::size_t c = 0; c < grid[l].size(); ++c) {
      if (c) os << "  ";
      os << grid[l][c];
      if (c + 1 < grid[l].size())
        os << std::string(widths[c] - grid[l][c].size(), ' ');
    }
    os << "\n";
    if (l == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 2 : 0);
      os << std::string(total, '-') << "\n";
    }
  }
  return os.str();
}

struct StatsSummary {
  std::vector<StatsRow> rows;
  std::filesystem::path json_path;
  std::filesystem::path table_path;
};

inline StatsSummary run_stats(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  RunPaths rp = resolve_run_paths(cfg);
  write_run_metadata(rp, cfg, "stats");

  std::vector<UtteranceManifest> manifests = load_manifests(rp.manifests.string());
  StatsSummary sum;
  sum.rows = dataset_stats(manifests);

  nlohmann::json doc = nlohmann::json::array();
  for (const StatsRow& r : sum.rows) {
    nlohmann::json row;
    row["language"] = language_code(r.language);
    row["transitions"] = r.transitions;
    row["utterances"] = r.utterances;
    row["total_words"] = r.total_words;
    row["min_words"] = r.min_words;
    row["max_words"] = r.max_words;
    row["mean_words"] = r.mean_words;
    row["total_duration_s"] = r.total_duration_s;
    row["min_duration_s"] = r.min_duration_s;
    row["max_duration_s"] = r.max_duration_s;
    row["mean_duration_s"] = r.mean_duration_s;
    auto caption_json = [](const CaptionLengthStats& c) -> nlohmann::json {
      if (!c.counted) return nullptr;
      return {{"counted", c.counted},
              {"min_words", c.min_words},
              {"max_words", c.max_words},
              {"mean_words", c.mean_words}};
    };
    row["caption_vi"] = caption_json(r.vi);
    row["caption_vd"] = caption_json(r.vd);
    row["distinct_plans"] = r.distinct_plans;
    row["distinct_speakers"] = r.distinct_speakers;
    doc.push_back(std::move(row));
  }

  sum.json_path = rp.reports_dir / "stats.json";
  sum.table_path = rp.reports_dir / "stats.txt";
  detail::write_text_file(sum.json_path, doc.dump(2) + "\n");
  detail::write_text_file(sum.table_path, format_stats_table(sum.rows));

  log << "stats: " << sum.rows.size() << " cell(s) over " << manifests.size()
      << " utterance(s) -> " << sum.table_path.string() << "\n";
  return sum;
}

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitClientError = 2;
inline constexpr int kExitUsage = 64;

inline int run_command(const std::string& command, const PipelineConfig& cfg,
                       std::ostream& out, std::ostream& err) {
  try {
    if (command == "plan")
      run_plan(cfg, out);
    else if (command == "build-dataset")
      run_build_dataset(cfg, out);
    else if (command == "preprocess")
      run_preprocess(cfg, out);
    else if (command == "train-mtetr")
      run_train_mtetr(cfg, out);
    else if (command == "annotate")
      run_annotate(cfg, out);
    else if (command == "evaluate")
      run_evaluate(cfg, out);
    else if (command == "stats")
      run_stats(cfg, out);
    else {
      err << "unknown command '" << command << "'\n";
      return kExitUsage;
    }
    return kExitOk;
  } catch (const ClientError& e) {
    err << command << ": client error: " << e.what() << "\n";
    for (const std::string& a : e.attempts()) err << "  " << a << "\n";
    return kExitClientError;
  } catch (const Error& e) {
    err << command << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace emotrans
