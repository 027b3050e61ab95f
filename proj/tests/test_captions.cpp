#include <cstdint>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "emotrans/captions.hpp"
#include "emotrans/core.hpp"
#include "emotrans/fallback_clients.hpp"
#include "emotrans/planner.hpp"

using namespace emotrans;

namespace {

// Real fallback transcripts, including the spans most likely to collide with
// caption wording (sadness/sorrow phrasing, " the ", " about ").
const char* transcript_for(EmotionLabel e) {
  switch (e) {
    case EmotionLabel::kAngry:
      return "It makes my blood boil every time the weekend trip comes up.";
    case EmotionLabel::kHappy:
      return "You beam with happiness whenever Sports works out.";
    case EmotionLabel::kNeutral:
      return "They outline the main points of Business without fuss.";
    case EmotionLabel::kSad:
      return "You carry a deep sadness about the weekend trip.";
    case EmotionLabel::kSurprised:
      return "The sudden news about Sports caught me completely off guard!";
  }
  return "";
}

AttributeSequence attrs_for(const TransitionPlan& plan, bool with_profile = true) {
  AttributeSequence attrs;
  if (with_profile) attrs.profile = SpeakerProfile{Gender::kFemale, AgeBucket::kYoungAdult};
  double t = 0.0;
  for (std::size_t i = 0; i < plan.emotions.size(); ++i) {
    SegmentAttributes s;
    s.emotion = plan.emotions[i];
    s.start_s = t;
    t += 2.0 + static_cast<double>(i % 3);
    s.end_s = t;
    s.pitch_cat = static_cast<LevelCategory>(i % 3);
    s.energy_cat = static_cast<LevelCategory>((i + 1) % 3);
    s.speed_cat = static_cast<SpeedCategory>((i + 2) % 3);
    s.pitch_hz = 130.0 + 45.0 * static_cast<double>(i % 3);
    s.energy_db = -24.0 + 8.0 * static_cast<double>((i + 1) % 3);
    s.speed_ups = 2.0 + 1.1 * static_cast<double>((i + 2) % 3);
    s.transcript = transcript_for(plan.emotions[i]);
    attrs.segments.push_back(std::move(s));
  }
  return attrs;
}

std::vector<std::string> transcripts_of(const AttributeSequence& attrs) {
  std::vector<std::string> out;
  for (const auto& s : attrs.segments) out.push_back(s.transcript);
  return out;
}

// Scripted stub: returns canned responses in order and records the prompts.
class ScriptedCaptionClient : public CaptionClient {
 public:
  explicit ScriptedCaptionClient(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  std::string complete(const std::string& prompt, std::uint64_t) override {
    prompts.push_back(prompt);
    std::size_t i = std::min(calls_, responses_.size() - 1);
    ++calls_;
    return responses_[i];
  }

  std::vector<std::string> prompts;

 private:
  std::vector<std::string> responses_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST_CASE("build_prompt substitutes every count slot", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);
  std::string prompt = build_prompt(spec, attrs);

  CHECK(prompt.find("{segment_num}") == std::string::npos);
  CHECK(prompt.find("{segment_descriptions}") == std::string::npos);
  CHECK(prompt.find("containing 2 consecutive segment(s)") != std::string::npos);
  CHECK(prompt.find("generate 2 fluent") != std::string::npos);
  CHECK(prompt.find("Output exactly 2 line(s)—one caption per segment—without "
                    "numbering.") != std::string::npos);
  CHECK(prompt.find("Do NOT quote or reuse any transcript content.") != std::string::npos);
  CHECK(prompt.find("Speaker: gender: female, age: young-adult") != std::string::npos);
  CHECK(prompt.find("Segment 1: emotion: Angry, pitch: low (130.0 Hz), energy: medium "
                    "(-16.0 dBFS), speed: fast (4.20 words/s), start: 00:00, end: 00:02, "
                    "transcript: \"") != std::string::npos);

  CHECK(build_prompt(spec, attrs) == prompt);
}

TEST_CASE("descriptive prompt carries both section headers", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kHappy}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kDescriptive, attrs, Language::kEn);
  std::string prompt = build_prompt(spec, attrs);

  CHECK(prompt.find("[Global Description]") != std::string::npos);
  CHECK(prompt.find("[Partial Description]") != std::string::npos);
  CHECK(prompt.find("PartX (start_time ~ end_time)") != std::string::npos);
  CHECK(prompt.find("{segment_data}") == std::string::npos);
  CHECK(prompt.find("If there is only one segment, do not mention emotional changes.") !=
        std::string::npos);
}

TEST_CASE("zh prompts label speed in chars per second", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kNeutral}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kZh);
  std::string prompt = build_prompt(spec, attrs);
  CHECK(prompt.find("chars/s") != std::string::npos);
  CHECK(prompt.find("words/s") == std::string::npos);
}

TEST_CASE("build_prompt rejects inconsistent specs", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kAngry}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);
  spec.segment_count = 2;
  CHECK_THROWS_AS(build_prompt(spec, attrs), ValidationError);

  AttributeSequence empty;
  CHECK_THROWS_AS(render_segment_block(empty, Language::kEn), ValidationError);
}

TEST_CASE("validate_vi flags wrong line counts", "[captions]") {
  ValidationReport rep = validate_vi("one\ntwo\nthree\n", 2, {});
  REQUIRE_FALSE(rep.passed());
  CHECK(rep.violations[0].rule == "line_count");
}

TEST_CASE("validate_vi flags verbatim transcript spans", "[captions]") {
  std::string transcript = "The quarterly report brings an unexpected twist.";
  // 12 characters lifted verbatim.
  ValidationReport rep = validate_vi("The speaker notes the quarterly report calmly.", 1,
                                     {transcript});
  REQUIRE_FALSE(rep.passed());
  CHECK(rep.violations[0].rule == "transcript_leak");

  // Exactly seven shared characters stay under the threshold; eight leak.
  std::string stem = "zqxkwvjh follows the rest";
  CHECK(validate_vi("Tone zqxkwvj rises.", 1, {stem}).passed());
  CHECK_FALSE(validate_vi("Tone zqxkwvjh rises.", 1, {stem}).passed());
}

TEST_CASE("validate_vi leak window shrinks to 4 characters for zh", "[captions]") {
  std::string transcript = "他对这件事情气得说不出话来。";
  ValidationReport rep =
      validate_vi("The tone recalls 气得说不 sharply.", 1, {transcript}, Language::kZh);
  REQUIRE_FALSE(rep.passed());
  CHECK(rep.violations[0].rule == "transcript_leak");

  ValidationReport ok =
      validate_vi("The tone stays sharp 气得说 here.", 1, {transcript}, Language::kZh);
  CHECK(ok.passed());
}

TEST_CASE("validate_vi flags numbering, symbols, and profile terms", "[captions]") {
  ValidationReport numbered = validate_vi("1. A calm opening line.\n2) A second line.", 2, {});
  bool saw_numbering = false;
  for (const auto& v : numbered.violations) saw_numbering |= v.rule == "numbering";
  CHECK(saw_numbering);

  ValidationReport bullet = validate_vi("- A calm opening line.", 1, {});
  CHECK_FALSE(bullet.passed());

  ValidationReport starred = validate_vi("A *calm* line.", 1, {});
  REQUIRE_FALSE(starred.passed());
  CHECK(starred.violations[0].rule == "symbols");

  ValidationReport gendered =
      validate_vi("A calm opening line.\nThe female voice rises.", 2, {});
  REQUIRE_FALSE(gendered.passed());
  CHECK(gendered.violations[0].rule == "profile_terms");

  // Age words are fine on the first line only.
  ValidationReport first_line_ok =
      validate_vi("An elderly male speaker opens calmly.\nThe voice then rises.", 2, {});
  CHECK(first_line_ok.passed());
}

TEST_CASE("validate_vi reports missing category words when attrs given", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));
  // Mentions every category of both segments except the word "slow".
  std::string caption =
      "A speaker opens on a low pitch, medium energy, and a fast pace, conveying an angry "
      "edge.\nThen the voice turns to a medium pitch, high energy pace, revealing a sad "
      "gravity.";
  ValidationReport rep =
      validate_vi(caption, 2, transcripts_of(attrs), Language::kEn, &attrs);
  REQUIRE_FALSE(rep.passed());
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].rule == "label_omission");
  CHECK(rep.violations[0].message.find("'slow'") != std::string::npos);
}

TEST_CASE("validate_vd accepts the documented part layout", "[captions]") {
  // En dash separators, as printed in annotation examples.
  std::string caption =
      "[Global Description]\n"
      "A male speaker shifts from a bright delivery to a slower close.\n"
      "\n"
      "[Partial Description]\n"
      "Part 1 (00:00–00:07): A high pitch opens the clip.\n"
      "Part 2 (00:07–00:18): A lower pitch winds the clip down.\n";
  CHECK(validate_vd(caption).passed());

  std::string til = "[Global Description]\nOne line.\n\n[Partial Description]\n"
                    "Part 1 (00:00 ~ 00:05): Steady.\nPart 2 (00:05 ~ 00:09): Softer.\n";
  CHECK(validate_vd(til).passed());

  std::string dash = "[Global Description]\nOne line.\n\n[Partial Description]\n"
                     "Part 1 (00:00 - 00:05): Steady.\nPart 2 (00:05 - 00:09): Softer.\n";
  CHECK(validate_vd(dash).passed());
}

TEST_CASE("validate_vd flags missing headers", "[captions]") {
  ValidationReport rep = validate_vd("Part 1 (00:00 ~ 00:05): Steady.\n");
  REQUIRE_FALSE(rep.passed());
  bool saw = false;
  for (const auto& v : rep.violations) saw |= v.rule == "header_partial";
  CHECK(saw);

  ValidationReport no_global =
      validate_vd("[Partial Description]\nPart 1 (00:00 ~ 00:05): Steady.\n");
  bool saw_global = false;
  for (const auto& v : no_global.violations) saw_global |= v.rule == "header_global";
  CHECK(saw_global);
}

TEST_CASE("validate_vd flags broken part entries", "[captions]") {
  auto doc = [](const std::string& parts) {
    return "[Global Description]\nOne line.\n\n[Partial Description]\n" + parts;
  };

  ValidationReport overlap = validate_vd(
      doc("Part 1 (00:00 ~ 00:07): A.\nPart 2 (00:05 ~ 00:09): B.\n"));
  REQUIRE_FALSE(overlap.passed());
  CHECK(overlap.violations[0].rule == "timestamp_order");

  ValidationReport order = validate_vd(
      doc("Part 2 (00:00 ~ 00:05): A.\nPart 1 (00:05 ~ 00:09): B.\n"));
  REQUIRE_FALSE(order.passed());
  CHECK(order.violations[0].rule == "part_index");

  ValidationReport backwards = validate_vd(doc("Part 1 (00:08 ~ 00:03): A.\n"));
  REQUIRE_FALSE(backwards.passed());
  CHECK(backwards.violations[0].rule == "part_times");

  ValidationReport malformed = validate_vd(doc("Part 1 (0:00 ~ 00:05): A.\n"));
  REQUIRE_FALSE(malformed.passed());
  CHECK(malformed.violations[0].rule == "part_format");

  ValidationReport missing_sep = validate_vd(doc("Part 1 (00:00 00:05): A.\n"));
  CHECK_FALSE(missing_sep.passed());

  ValidationReport counted = validate_vd(doc("Part 1 (00:00 ~ 00:05): A.\n"), 2);
  REQUIRE_FALSE(counted.passed());
  CHECK(counted.violations[0].rule == "part_count");

  // Continuation lines of a description are allowed; stray text before the
  // first part entry is not.
  CHECK(validate_vd(doc("Part 1 (00:00 ~ 00:05): A sentence\nthat wraps onto more.\n"))
            .passed());
  CHECK_FALSE(validate_vd(doc("stray text\nPart 1 (00:00 ~ 00:05): A.\n")).passed());
}

TEST_CASE("validate_vd wants a single-line global body", "[captions]") {
  ValidationReport rep = validate_vd(
      "[Global Description]\nFirst line.\nSecond line.\n\n[Partial Description]\n"
      "Part 1 (00:00 ~ 00:05): A.\n");
  REQUIRE_FALSE(rep.passed());
  CHECK(rep.violations[0].rule == "global_shape");

  ValidationReport symbols = validate_vd(
      "[Global Description]\nA #tagged line.\n\n[Partial Description]\n"
      "Part 1 (00:00 ~ 00:05): A.\n");
  bool saw = false;
  for (const auto& v : symbols.violations) saw |= v.rule == "symbols";
  CHECK(saw);
}

TEST_CASE("validators are deterministic", "[captions]") {
  std::string caption = "1. *bad* line with female wording.";
  ValidationReport a = validate_vi(caption, 2, {"some transcript text here"});
  ValidationReport b = validate_vi(caption, 2, {"some transcript text here"});
  REQUIRE(a.violations.size() == b.violations.size());
  for (std::size_t i = 0; i < a.violations.size(); ++i) {
    CHECK(a.violations[i].rule == b.violations[i].rule);
    CHECK(a.violations[i].message == b.violations[i].message);
  }
}

TEST_CASE("compose retries with violation feedback", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);

  TemplateCaptionClient tpl;
  std::string good = tpl.complete(build_prompt(spec, attrs), 0);

  ScriptedCaptionClient client({"only one line here", good});
  ComposeResult res = compose_with_regeneration(client, spec, attrs, 3);
  CHECK(res.attempts == 2);
  CHECK(res.text == good);
  REQUIRE(res.reports.size() == 2);
  CHECK_FALSE(res.reports[0].passed());
  CHECK(res.reports[1].passed());
  REQUIRE(client.prompts.size() == 2);
  CHECK(client.prompts[1].find("line_count") != std::string::npos);
}

TEST_CASE("compose throws after exhausting attempts", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kHappy}));
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);
  ScriptedCaptionClient client({"*"});
  try {
    compose_with_regeneration(client, spec, attrs, 3);
    FAIL("expected ConsistencyError");
  } catch (const ConsistencyError& e) {
    std::string msg = e.what();
    CHECK(msg.find("3 attempt(s)") != std::string::npos);
    CHECK(msg.find("attempt 1") != std::string::npos);
    CHECK(msg.find("attempt 3") != std::string::npos);
  }
  CHECK(client.prompts.size() == 3);

  CHECK_THROWS_AS(compose_with_regeneration(client, spec, attrs, 0), RangeError);
}

TEST_CASE("template backend passes on the first attempt", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of(
      {EmotionLabel::kSurprised, EmotionLabel::kNeutral, EmotionLabel::kSad}));
  TemplateCaptionClient client;
  for (CaptionVersion v : {CaptionVersion::kInstructional, CaptionVersion::kDescriptive}) {
    PromptSpec spec = make_prompt_spec(v, attrs, Language::kEn);
    ComposeResult res = compose_with_regeneration(client, spec, attrs, 3);
    CHECK(res.attempts == 1);
    CHECK(validate_caption(spec, res.text, attrs).passed());
  }
}

TEST_CASE("template captions read the profile from the prompt", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kHappy}));
  TemplateCaptionClient client;
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);
  std::string vi = client.complete(build_prompt(spec, attrs), 0);
  CHECK(vi.rfind("A young-adult female speaker opens on ", 0) == 0);

  AttributeSequence anon = attrs_for(TransitionPlan::of({EmotionLabel::kAngry}), false);
  PromptSpec anon_spec = make_prompt_spec(CaptionVersion::kInstructional, anon, Language::kEn);
  std::string anon_vi = client.complete(build_prompt(anon_spec, anon), 0);
  CHECK(anon_vi.rfind("The speaker opens on ", 0) == 0);
  CHECK(validate_caption(anon_spec, anon_vi, anon).passed());
}

TEST_CASE("ssml emission mirrors the attribute sequence", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));
  std::string ssml = emit_ssml(attrs);

  CHECK(ssml.find("<speak dialect=\"emo-segment\" version=\"1\">") != std::string::npos);
  CHECK(ssml.find("<profile gender=\"female\" age=\"young-adult\"/>") != std::string::npos);
  std::size_t first = ssml.find("emotion=\"angry\"");
  std::size_t second = ssml.find("emotion=\"sad\"");
  REQUIRE(first != std::string::npos);
  REQUIRE(second != std::string::npos);
  CHECK(first < second);

  SsmlDocument doc = parse_ssml(ssml);
  CHECK(doc.version == kSsmlDialectVersion);
  CHECK(doc.profile == attrs.profile);
  REQUIRE(doc.segments.size() == 2);
  CHECK(doc.segments[0].pitch == "low");
  CHECK(doc.segments[0].text == attrs.segments[0].transcript);
  CHECK(doc.plan() == attrs.plan());
}

TEST_CASE("ssml omits profile attributes when unknown", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kNeutral}), false);
  std::string ssml = emit_ssml(attrs);
  CHECK(ssml.find("<profile") == std::string::npos);
  CHECK(parse_ssml(ssml).profile.empty());

  attrs.profile.gender = Gender::kMale;
  std::string half = emit_ssml(attrs);
  CHECK(half.find("<profile gender=\"male\"/>") != std::string::npos);
  CHECK(half.find("age=") == std::string::npos);
  CHECK(parse_ssml(half).profile.age_bucket == AgeBucket::kUnknownAge);
}

TEST_CASE("ssml escapes markup in transcripts", "[captions]") {
  AttributeSequence attrs = attrs_for(TransitionPlan::of({EmotionLabel::kHappy}));
  attrs.segments[0].transcript = "Tom & Jerry say \"1 < 2 > 0\" & 'done'";
  std::string ssml = emit_ssml(attrs);
  CHECK(ssml.find("&amp;") != std::string::npos);
  CHECK(ssml.find("&lt;") != std::string::npos);
  SsmlDocument doc = parse_ssml(ssml);
  CHECK(doc.segments[0].text == attrs.segments[0].transcript);
}

TEST_CASE("parse_ssml rejects malformed documents", "[captions]") {
  AttributeSequence attrs =
      attrs_for(TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));
  std::string good = emit_ssml(attrs);

  auto broken = [&](const std::string& what, const std::string& with) {
    std::string bad = good;
    std::size_t at = bad.find(what);
    REQUIRE(at != std::string::npos);
    bad.replace(at, what.size(), with);
    return bad;
  };

  // 1: wrong dialect
  CHECK_THROWS_AS(parse_ssml(broken("emo-segment", "x-other")), FormatError);
  // 2: unsupported version
  CHECK_THROWS_AS(parse_ssml(broken("version=\"1\"", "version=\"2\"")), FormatError);
  // 3: missing close tag
  CHECK_THROWS_AS(parse_ssml(broken("</speak>", "")), FormatError);
  // 4: unknown element
  CHECK_THROWS_AS(parse_ssml(broken("<profile", "<unknown")), FormatError);
  // 5: out-of-order segment index
  CHECK_THROWS_AS(parse_ssml(broken("index=\"2\"", "index=\"3\"")), FormatError);
  // 6: malformed timestamp
  CHECK_THROWS_AS(parse_ssml(broken("start=\"00:00\"", "start=\"0:00\"")), FormatError);
  // 7: unknown emotion
  CHECK_THROWS_AS(parse_ssml(broken("emotion=\"angry\"", "emotion=\"angsty\"")), FormatError);
  // 8: unknown category word
  CHECK_THROWS_AS(parse_ssml(broken("pitch=\"low\"", "pitch=\"shrill\"")), FormatError);
  // 9: missing required attribute
  CHECK_THROWS_AS(parse_ssml(broken("emotion=\"angry\" ", "")), FormatError);
  // 10: segment ends before it starts
  CHECK_THROWS_AS(parse_ssml(broken("end=\"00:05\"", "end=\"00:01\"")), FormatError);
  // 11: truncated document
  CHECK_THROWS_AS(parse_ssml(good.substr(0, good.size() / 2)), FormatError);
  // 12: trailing garbage
  CHECK_THROWS_AS(parse_ssml(good + "tail"), FormatError);
  // 13: stray text between elements
  CHECK_THROWS_AS(parse_ssml(broken("  <segment index=\"1\"", "loose <segment index=\"1\"")),
                  FormatError);
  // 14: bad entity
  CHECK_THROWS_AS(parse_ssml(broken("It makes", "&nope; It makes")), FormatError);
  // 15: unterminated attribute value
  CHECK_THROWS_AS(parse_ssml("<speak dialect=\"emo-segment"), FormatError);
}

TEST_CASE("parse_caption_plan reads templates and ssml", "[captions]") {
  TransitionPlan plan = TransitionPlan::of(
      {EmotionLabel::kHappy, EmotionLabel::kSad, EmotionLabel::kHappy});
  AttributeSequence attrs = attrs_for(plan);
  TemplateCaptionClient client;
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kEn);
  std::string vi = client.complete(build_prompt(spec, attrs), 0);

  CaptionPlanParse from_vi = parse_caption_plan(vi);
  CHECK(from_vi.plan == plan);
  CHECK(from_vi.exact);

  CaptionPlanParse from_ssml = parse_caption_plan(emit_ssml(attrs));
  CHECK(from_ssml.plan == plan);
  CHECK(from_ssml.exact);

  CHECK_THROWS_AS(parse_caption_plan("A line with no emotion words at all."), ParseError);
}

TEST_CASE("parse_caption_plan keyword fallback marks ambiguity", "[captions]") {
  CaptionPlanParse p =
      parse_caption_plan("The voice moves from angry heat to a sad hush.\nA sad close.");
  CHECK_FALSE(p.exact);
  CHECK(p.plan == TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kSad}));

  // Word boundaries: "sadly" does not register as "sad".
  CaptionPlanParse q = parse_caption_plan("A neutral note, delivered sadly.");
  CHECK(q.plan == TransitionPlan::of({EmotionLabel::kNeutral}));
  CHECK(q.exact);
}

TEST_CASE("caption and ssml round trip covers every plan up to three transitions",
          "[captions]") {
  TemplateCaptionClient client;
  int checked = 0;
  for (int k = 0; k <= 3; ++k) {
    for (const TransitionPlan& plan : enumerate_transition_plans(k)) {
      AttributeSequence attrs = attrs_for(plan);
      // Rotate through the full fallback sentence bank so caption wording is
      // proven leak-free against every transcript frame.
      static const char* topics[] = {"the weekend trip", "Sports", "Business"};
      for (std::size_t i = 0; i < attrs.segments.size(); ++i) {
        attrs.segments[i].transcript = detail::substitute_topic(
            detail::en_sentence(attrs.segments[i].emotion, static_cast<int>(i % 3),
                                (static_cast<int>(i) + k) % 2),
            topics[(static_cast<int>(i) + checked) % 3]);
      }

      PromptSpec vi_spec = make_prompt_spec(CaptionVersion::kInstructional, attrs,
                                            Language::kEn);
      ComposeResult vi = compose_with_regeneration(client, vi_spec, attrs, 3);
      REQUIRE(vi.attempts == 1);
      CaptionPlanParse parsed = parse_caption_plan(vi.text);
      REQUIRE(parsed.exact);
      REQUIRE(parsed.plan == plan);

      PromptSpec vd_spec = make_prompt_spec(CaptionVersion::kDescriptive, attrs,
                                            Language::kEn);
      ComposeResult vd = compose_with_regeneration(client, vd_spec, attrs, 3);
      REQUIRE(vd.attempts == 1);
      REQUIRE(parse_caption_plan(vd.text).plan == plan);

      SsmlDocument doc = parse_ssml(emit_ssml(attrs));
      REQUIRE(doc.plan() == plan);
      ++checked;
    }
  }
  CHECK(checked == 425);
}

TEST_CASE("compose_caption_record fills both versions and the plan", "[captions]") {
  TransitionPlan plan = TransitionPlan::of({EmotionLabel::kNeutral, EmotionLabel::kAngry});
  AttributeSequence attrs = attrs_for(plan);
  TemplateCaptionClient client;
  CaptionRecord rec = compose_caption_record(client, attrs, Language::kEn, 7);
  CHECK(rec.encoded_plan == plan);
  CHECK(parse_caption_plan(rec.v_i).plan == plan);
  CHECK(validate_vd(rec.v_d, 2).passed());

  CaptionRecord again = compose_caption_record(client, attrs, Language::kEn, 7);
  CHECK(again == rec);
}

TEST_CASE("zh transcripts stay leak-safe under template captions", "[captions]") {
  TransitionPlan plan = TransitionPlan::of({EmotionLabel::kAngry, EmotionLabel::kHappy});
  AttributeSequence attrs = attrs_for(plan);
  attrs.segments[0].transcript = detail::substitute_topic(
      detail::zh_sentence(EmotionLabel::kAngry, 0, 0), "周末旅行");
  attrs.segments[1].transcript = detail::substitute_topic(
      detail::zh_sentence(EmotionLabel::kHappy, 1, 1), "周末旅行");
  TemplateCaptionClient client;
  PromptSpec spec = make_prompt_spec(CaptionVersion::kInstructional, attrs, Language::kZh);
  ComposeResult res = compose_with_regeneration(client, spec, attrs, 3);
  CHECK(res.attempts == 1);
  CHECK(parse_caption_plan(res.text).plan == plan);
}
