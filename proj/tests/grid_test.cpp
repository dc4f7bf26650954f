#include "otroll/grid.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <utility>

namespace otroll {
namespace {

NoteEvent note(double on, double off, int pitch) { return {on, off, pitch, std::nullopt}; }

TEST(GridTest, RejectsInvalidDimensions) {
  EXPECT_THROW(Grid(0, 12), ValidationError);
  EXPECT_THROW(Grid(10, 0), ValidationError);
  EXPECT_THROW(Grid(10, 12, 0.0), ValidationError);
  EXPECT_THROW(Grid(10, 88, 0.025, 41), ValidationError);  // 41 + 87 > 127
  EXPECT_NO_THROW(Grid(10, 88, 0.025, 40));
}

TEST(GridTest, DefaultsDescribeThePianoAt25ms) {
  Grid g(100);
  EXPECT_DOUBLE_EQ(g.frame_period_s(), 1200.0 / 48000.0);
  EXPECT_EQ(g.n_pitches(), 88);
  EXPECT_EQ(g.lowest_pitch(), 21);
}

TEST(NoteListTest, SortsByOnsetThenPitchStably) {
  NoteEvent a{0.5, 1.0, 60, 10};
  NoteEvent b{0.5, 1.0, 60, 20};
  NoteList list({note(1.0, 2.0, 50), a, note(0.5, 0.7, 40), b});
  ASSERT_EQ(list.size(), 4u);
  EXPECT_EQ(list[0].pitch, 40);
  EXPECT_EQ(list[1], a);
  EXPECT_EQ(list[2], b);
  EXPECT_EQ(list[3].pitch, 50);
}

TEST(NoteListTest, RejectsInvalidNotes) {
  EXPECT_THROW(NoteList({note(1.0, 1.0, 60)}), ValidationError);
  EXPECT_THROW(NoteList({note(-0.1, 1.0, 60)}), ValidationError);
  EXPECT_THROW(NoteList({note(0.0, 1.0, 128)}), ValidationError);
  EXPECT_THROW(NoteList({NoteEvent{0.0, 1.0, 60, 0}}), ValidationError);
}

TEST(QuantizeTest, SingleNoteLandsOnNearestFrame) {
  const Grid g(40);
  const auto t = quantize_events(NoteList({note(0.103, 0.5, 60)}), g, EventKind::onset);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (TargetAtom{4, 39, 1.0}));
  EXPECT_EQ(t.n_clamped(), 0u);
}

TEST(QuantizeTest, EmptyListGivesEmptyTarget) {
  EXPECT_TRUE(quantize_events(NoteList{}, Grid(10), EventKind::onset).empty());
}

TEST(QuantizeTest, SameCellEventsMergeWithoutSumming) {
  const Grid g(40);
  const auto t = quantize_events(NoteList({note(0.100, 0.3, 60), note(0.101, 0.6, 60)}), g,
                                 EventKind::onset, 1.0);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (TargetAtom{4, 39, 1.0}));
}

TEST(QuantizeTest, HalfFramesRoundUp) {
  const Grid g(40);
  EXPECT_EQ(g.nearest_frame(0.0125), 1);
  EXPECT_EQ(g.nearest_frame(0.0375), 2);
  EXPECT_EQ(g.nearest_frame(0.0374), 1);
}

TEST(QuantizeTest, PitchOutsideGridNamesTheNote) {
  const Grid g(40, 12, 0.025, 60);
  try {
    quantize_events(NoteList({note(0.0, 0.1, 61), note(0.2, 0.3, 59)}), g, EventKind::onset);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("pitch 59"), std::string::npos) << e.what();
  }
}

TEST(QuantizeTest, LateEventsClampToLastFrame) {
  const Grid g(10);
  const auto t = quantize_events(NoteList({note(0.1, 5.0, 60)}), g, EventKind::offset);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].frame, 9);
  EXPECT_EQ(t.n_clamped(), 1u);
}

TEST(QuantizeTest, RejectsNonPositiveMass) {
  EXPECT_THROW(quantize_events(NoteList{}, Grid(4), EventKind::onset, 0.0), ValidationError);
}

TEST(TargetDistributionTest, EnforcesInvariants) {
  EXPECT_THROW(TargetDistribution(4, 4, {{4, 0, 1.0}}), RangeError);
  EXPECT_THROW(TargetDistribution(4, 4, {{1, 1, 0.0}}), ValidationError);
  EXPECT_THROW(TargetDistribution(4, 4, {{1, 1, 1.0}, {1, 1, 1.0}}), ValidationError);
  const TargetDistribution t(4, 4, {{2, 1, 1.0}, {1, 3, 1.0}, {1, 0, 1.0}});
  EXPECT_EQ(t[0].cell(), (Cell{1, 0}));
  EXPECT_EQ(t[1].cell(), (Cell{1, 3}));
  EXPECT_EQ(t[2].cell(), (Cell{2, 1}));
}

// Random notes with arbitrary (not grid-aligned) times inside the grid.
NoteList random_notes(std::mt19937_64& rng, const Grid& g, int n) {
  std::uniform_real_distribution<double> time(0.0, (g.n_frames() - 2) * g.frame_period_s());
  std::uniform_int_distribution<int> pitch(g.lowest_pitch(), g.lowest_pitch() + g.n_pitches() - 1);
  std::vector<NoteEvent> notes;
  for (int i = 0; i < n; ++i) {
    const double on = time(rng);
    notes.push_back(note(on, on + 0.01 + time(rng) / 4, pitch(rng)));
  }
  return NoteList(std::move(notes));
}

TEST(QuantizeProperty, RequantizingAlignedTimesIsIdempotent) {
  std::mt19937_64 rng(7);
  const Grid g(80, 24);
  for (int trial = 0; trial < 200; ++trial) {
    const auto notes = random_notes(rng, g, 12);
    const auto first = quantize_events(notes, g, EventKind::onset);
    std::vector<NoteEvent> aligned;
    for (const auto& a : first.atoms())
      aligned.push_back(note(g.frame_time(a.frame), g.frame_time(a.frame) + 1.0, g.lowest_pitch() + a.pitch));
    EXPECT_EQ(quantize_events(NoteList(aligned), g, EventKind::onset).atoms().size(), first.size());
    const auto second = quantize_events(NoteList(aligned), g, EventKind::onset);
    EXPECT_TRUE(std::equal(first.atoms().begin(), first.atoms().end(), second.atoms().begin()));
  }
}

TEST(QuantizeProperty, TotalMassIsWTimesDistinctCells) {
  std::mt19937_64 rng(11);
  const Grid g(30, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto notes = random_notes(rng, g, 15);
    const double w = 0.25 + trial % 4;
    std::set<std::pair<long long, int>> cells;
    for (const auto& n : notes) cells.insert({g.nearest_frame(n.onset_s), n.pitch});
    const auto t = quantize_events(notes, g, EventKind::onset, w);
    EXPECT_DOUBLE_EQ(t.total_mass(), w * static_cast<double>(cells.size()));
  }
}

TEST(QuantizeProperty, OnsetAndOffsetCountsAgreeWithoutMerges) {
  std::mt19937_64 rng(13);
  const Grid g(200, 88);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto notes = random_notes(rng, g, 5);
    const auto on = quantize_events(notes, g, EventKind::onset);
    const auto off = quantize_events(notes, g, EventKind::offset);
    if (on.size() == notes.size() && off.size() == notes.size()) {
      EXPECT_EQ(on.size(), off.size());
      ++compared;
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(SynthTest, ZeroNotesIsEmpty) { EXPECT_TRUE(synth_notes(42, 0, Grid(40, 12)).empty()); }

TEST(SynthTest, DeterministicForASeed) {
  const Grid g(40, 12);
  const auto a = synth_notes(42, 3, g, 4);
  const auto b = synth_notes(42, 3, g, 4);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
}

TEST(SynthTest, SeedsDiffer) {
  const Grid g(40, 12);
  EXPECT_NE(synth_notes(1, 3, g, 4), synth_notes(2, 3, g, 4));
}

TEST(SynthTest, CapacityErrorWhenGridTooSmall) {
  const Grid g(10, 2);
  // Onsets 0..8 with gap 4 leave room for 3 per pitch.
  EXPECT_NO_THROW(synth_notes(0, 6, g, 4));
  EXPECT_THROW(synth_notes(0, 7, g, 4), CapacityError);
  EXPECT_THROW(synth_notes(0, 1, Grid(1, 4), 1), CapacityError);
  EXPECT_THROW(synth_notes(0, 1, g, 0), ValidationError);
}

TEST(SynthProperty, NotesRespectGridAndGaps) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Grid g(20 + static_cast<int>(seed % 50), 1 + static_cast<int>(seed % 7));
    const int gap = 1 + static_cast<int>(seed % 6);
    const std::size_t n = seed % 9;
    NoteList notes;
    try {
      notes = synth_notes(seed, n, g, gap);
    } catch (const CapacityError&) {
      continue;
    }
    ASSERT_EQ(notes.size(), n);
    for (std::size_t i = 0; i < notes.size(); ++i) {
      const auto& a = notes[i];
      EXPECT_TRUE(g.contains_pitch(a.pitch));
      EXPECT_LE(g.nearest_frame(a.offset_s), g.n_frames() - 1);
      EXPECT_GE(g.nearest_frame(a.offset_s), g.nearest_frame(a.onset_s) + 1);
      for (std::size_t k = i + 1; k < notes.size(); ++k) {
        const auto& b = notes[k];
        if (b.pitch != a.pitch) continue;
        EXPECT_GE(g.nearest_frame(b.onset_s) - g.nearest_frame(a.onset_s), gap);
        EXPECT_LT(a.offset_s, b.onset_s);
        break;
      }
    }
  }
}

}  // namespace
}  // namespace otroll
