#include <catch2/catch_amalgamated.hpp>

#include "emotrans/core.hpp"

using namespace emotrans;

TEST_CASE("emotion names round trip") {
  for (EmotionLabel e : all_emotions()) {
    REQUIRE(parse_emotion(emotion_name(e)) == e);
  }
  REQUIRE_FALSE(parse_emotion("bored").has_value());
  REQUIRE_THROWS_AS(parse_emotion_or_throw("bored"), ValidationError);
}

TEST_CASE("emotion display names") {
  REQUIRE(std::string(emotion_display_name(EmotionLabel::kSad)) == "Sadness");
  REQUIRE(std::string(emotion_display_name(EmotionLabel::kAngry)) == "Angry");
  REQUIRE(std::string(emotion_display_name(EmotionLabel::kHappy)) == "Happy");
  REQUIRE(std::string(emotion_display_name(EmotionLabel::kNeutral)) == "Neutral");
  REQUIRE(std::string(emotion_display_name(EmotionLabel::kSurprised)) == "Surprised");
}

TEST_CASE("emotion enum order is alphabetical by name") {
  auto a = all_emotions();
  for (std::size_t i = 1; i < a.size(); ++i) {
    REQUIRE(std::string(emotion_name(a[i - 1])) < std::string(emotion_name(a[i])));
  }
}

TEST_CASE("transition plan validation") {
  auto plan = TransitionPlan::of({EmotionLabel::kSad, EmotionLabel::kHappy,
                                  EmotionLabel::kSad});
  REQUIRE(plan.transition_count() == 2);

  TransitionPlan empty;
  REQUIRE_THROWS_AS(empty.validate(), ValidationError);

  TransitionPlan dup{{EmotionLabel::kSad, EmotionLabel::kSad}};
  REQUIRE_THROWS_AS(dup.validate(), ValidationError);

  TransitionPlan single{{EmotionLabel::kNeutral}};
  REQUIRE_NOTHROW(single.validate());
  REQUIRE(single.transition_count() == 0);
}

TEST_CASE("collapse_adjacent") {
  using E = EmotionLabel;
  std::vector<E> seq{E::kSad, E::kSad, E::kHappy, E::kHappy, E::kHappy, E::kSad};
  REQUIRE(collapse_adjacent(seq) == std::vector<E>{E::kSad, E::kHappy, E::kSad});
  REQUIRE(collapse_adjacent({}).empty());
}

TEST_CASE("format_timestamp") {
  REQUIRE(format_timestamp(0.0) == "00:00");
  REQUIRE(format_timestamp(5.0) == "00:05");
  REQUIRE(format_timestamp(65.0) == "01:05");
  REQUIRE(format_timestamp(5.999) == "00:05");
  REQUIRE(format_timestamp(3599.9) == "59:59");
  REQUIRE_THROWS_AS(format_timestamp(-0.001), RangeError);
  REQUIRE_THROWS_AS(format_timestamp(3600.0), RangeError);
}

TEST_CASE("parse_timestamp") {
  REQUIRE(parse_timestamp("00:00") == 0.0);
  REQUIRE(parse_timestamp("01:05") == 65.0);
  REQUIRE(parse_timestamp("59:59") == 3599.0);
  REQUIRE_THROWS_AS(parse_timestamp("1:05"), ParseError);
  REQUIRE_THROWS_AS(parse_timestamp("00-05"), ParseError);
  REQUIRE_THROWS_AS(parse_timestamp("00:65"), ParseError);
  REQUIRE_THROWS_AS(parse_timestamp("ab:cd"), ParseError);
}

TEST_CASE("timestamps round trip on whole seconds") {
  for (double t : {0.0, 5.0, 59.0, 60.0, 65.0, 3599.0}) {
    REQUIRE(parse_timestamp(format_timestamp(t)) == t);
  }
}

TEST_CASE("timed segment validation") {
  TimedSegment s{1.0, 2.0, EmotionLabel::kHappy};
  REQUIRE_NOTHROW(s.validate());
  REQUIRE(s.duration_s() == 1.0);

  TimedSegment bad{2.0, 2.0, EmotionLabel::kHappy};
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);
  TimedSegment neg{-1.0, 2.0, EmotionLabel::kHappy};
  REQUIRE_THROWS_AS(neg.validate(), ValidationError);
}

TEST_CASE("segment list validation") {
  using E = EmotionLabel;
  std::vector<TimedSegment> ok{{0, 5, E::kAngry}, {5, 8, E::kSad}};
  REQUIRE_NOTHROW(validate_segment_list(ok));

  std::vector<TimedSegment> overlap{{0, 5, E::kAngry}, {4, 8, E::kSad}};
  REQUIRE_THROWS_AS(validate_segment_list(overlap), ValidationError);

  std::vector<TimedSegment> same{{0, 5, E::kSad}, {5, 8, E::kSad}};
  REQUIRE_THROWS_AS(validate_segment_list(same), ValidationError);
}

TEST_CASE("speaker metadata parsing") {
  REQUIRE(parse_gender_or_throw("female") == Gender::kFemale);
  REQUIRE(parse_age_bucket_or_throw("young-adult") == AgeBucket::kYoungAdult);
  REQUIRE_THROWS_AS(parse_gender_or_throw("robot"), ValidationError);
  REQUIRE_THROWS_AS(parse_age_bucket_or_throw("ancient"), ValidationError);
  SpeakerProfile p;
  REQUIRE(p.empty());
  p.gender = Gender::kMale;
  REQUIRE_FALSE(p.empty());
}

TEST_CASE("manifest timeline validation") {
  using E = EmotionLabel;
  UtteranceManifest m;
  m.id = "utt-1";
  m.speaker_id = "spk01";
  m.plan = TransitionPlan::of({E::kSad, E::kHappy});
  m.sentences = {
      {"one", E::kSad, 0.0, 2.0, "a.wav"},
      {"two", E::kHappy, 2.0, 3.5, "b.wav"},
  };
  REQUIRE_NOTHROW(m.validate());
  REQUIRE(m.duration_s() == 3.5);

  SECTION("gap in the timeline is rejected") {
    m.sentences[1].start_s = 2.5;
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
  }
  SECTION("plan mismatch is rejected") {
    m.plan = TransitionPlan::of({E::kHappy, E::kSad});
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
  }
  SECTION("segments merge adjacent same-emotion sentences") {
    m.plan = TransitionPlan::of({E::kSad, E::kHappy});
    m.sentences = {
        {"one", E::kSad, 0.0, 2.0, "a.wav"},
        {"two", E::kSad, 2.0, 3.0, "b.wav"},
        {"three", E::kHappy, 3.0, 4.0, "c.wav"},
    };
    REQUIRE_NOTHROW(m.validate());
    auto segs = m.segments();
    REQUIRE(segs.size() == 2);
    REQUIRE(segs[0] == TimedSegment{0.0, 3.0, E::kSad});
    REQUIRE(segs[1] == TimedSegment{3.0, 4.0, E::kHappy});
  }
}
