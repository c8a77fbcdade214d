#include <gtest/gtest.h>

#include <filesystem>

#include "meter/harness.hpp"
#include "meter/synth.hpp"

using namespace meter;
using namespace meter::harness;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("meter_harness_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Silent recording at a low sample rate with one beat per second.
void write_recording(const fs::path& dir, const std::string& id, double seconds, int sr = 200) {
    AudioBuffer a;
    a.sample_rate = sr;
    a.samples.assign(static_cast<std::size_t>(seconds * sr), 0.0);
    io::write_wav(dir / (id + ".wav"), a);
    BeatList b;
    for (int i = 0; i < static_cast<int>(seconds); ++i) b.events.push_back({i + 0.2, i % 4 + 1});
    io::write_beats(dir / (id + ".beats"), b);
}

DatasetManifest manifest_for(const fs::path& dir, const std::vector<std::string>& ids) {
    DatasetManifest m;
    m.dataset_name = "test";
    m.beats_per_bar = 4;
    for (const auto& id : ids) m.entries.push_back({id, dir / (id + ".wav"), dir / (id + ".beats")});
    return m;
}

// In-memory samba-like dataset of short excerpts.
Dataset small_dataset(int n, double seconds) {
    synth::SuiteOptions opt;
    opt.excerpt_seconds = seconds;
    Dataset ds;
    ds.name = "samba_like";
    ds.beats_per_bar = 2;
    for (int i = 0; i < n; ++i) {
        const auto rec = synth::generate(synth::suite_spec(synth::Suite::samba_like, i, opt), opt.sample_rate);
        ds.excerpts.push_back({"t" + std::to_string(i), "t" + std::to_string(i), rec.audio, rec.beats});
    }
    return ds;
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.tcn.n_layers = 3;
    c.tcn.base_channels = 4;
    c.tcn.kernel_size = 3;
    c.tcn.dilations = {1, 2, 4};
    for (auto* s : {&c.scratch_schedule, &c.finetune_schedule}) {
        s->max_epochs = 3;
        s->plateau_patience = 1;
        s->early_stop_patience = 2;
    }
    c.snippets.snippet_seconds = 6.0;
    c.bootstrap_resamples = 50;
    return c;
}

double mean_beat_f(const RunRecord& r) {
    double f = 0.0;
    for (const auto& t : r.tracks) f += t.beat.f_measure;
    return f / static_cast<double>(r.tracks.size());
}

}  // namespace

TEST(Segmentation, NinetyFiveSecondsGiveThreeExcerpts) {
    const auto b = segment_bounds(95.0, 30.0);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[2], std::make_pair(60.0, 90.0));
    EXPECT_EQ(segment_bounds(29.0, 30.0).size(), 1u);
    EXPECT_EQ(segment_bounds(30.0, 30.0).size(), 1u);
}

TEST(LoadDataset, SegmentsAndReoffsetsAnnotations) {
    const auto dir = scratch_dir("segments");
    write_recording(dir, "long", 95.0);
    write_recording(dir, "short", 20.0);
    const auto ds = load_dataset(manifest_for(dir, {"long", "short"}));
    ASSERT_EQ(ds.excerpts.size(), 4u);
    EXPECT_EQ(ds.excerpts[1].id, "long_2");
    EXPECT_EQ(ds.excerpts[1].source, "long");
    EXPECT_NEAR(ds.excerpts[1].audio.duration(), 30.0, 1e-9);
    // the beat at 31.2 s lands in the second excerpt at 1.2 s
    EXPECT_NEAR(ds.excerpts[1].beats.events[1].time, 1.2, 1e-9);
    EXPECT_EQ(ds.excerpts[3].id, "short");
    EXPECT_NEAR(ds.excerpts[3].audio.duration(), 20.0, 1e-9);
    fs::remove_all(dir);
}

TEST(LoadDataset, SamplesDownToNinetyThreeAndDropsSparseExcerpts) {
    const auto dir = scratch_dir("sample");
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
        ids.push_back("r" + std::to_string(i));
        write_recording(dir, ids.back(), 750.0, 20);
    }
    AudioBuffer quiet;
    quiet.sample_rate = 20;
    quiet.samples.assign(600, 0.0);
    io::write_wav(dir / "sparse.wav", quiet);
    io::write_text(dir / "sparse.beats", "1.0\t1\n");
    ids.push_back("sparse");
    const auto m = manifest_for(dir, ids);
    const auto ds = load_dataset(m);
    EXPECT_EQ(ds.excerpts.size(), 93u);
    for (const auto& e : ds.excerpts) EXPECT_NE(e.id, "sparse");
    const auto again = load_dataset(m);
    for (std::size_t i = 0; i < 93; ++i) EXPECT_EQ(ds.excerpts[i].id, again.excerpts[i].id);
    LoadOptions other;
    other.seed = 1;
    const auto resampled = load_dataset(m, other);
    bool differs = false;
    for (std::size_t i = 0; i < 93; ++i) differs |= ds.excerpts[i].id != resampled.excerpts[i].id;
    EXPECT_TRUE(differs);
    fs::remove_all(dir);
}

TEST(LoadDataset, BadAnnotationNamesFileAndLine) {
    const auto dir = scratch_dir("bad");
    write_recording(dir, "a", 40.0);
    io::write_text(dir / "a.beats", "0.5\t1\n1.0\t2\nbanana\t3\n");
    try {
        load_dataset(manifest_for(dir, {"a"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("a.beats:3"), std::string::npos) << e.what();
    }
    fs::remove(dir / "a.beats");
    EXPECT_THROW(load_dataset(manifest_for(dir, {"a"})), Error);
    fs::remove_all(dir);
}

TEST(Split, EightyTwentyDisjointAndSeeded) {
    const auto s = split_train_test(93, 4);
    EXPECT_EQ(s.train.size(), 74u);
    EXPECT_EQ(s.test.size(), 19u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), 93u);
    EXPECT_EQ(split_train_test(93, 4).train, s.train);
    EXPECT_NE(split_train_test(93, 5).train, s.train);
    EXPECT_THROW(split_train_test(4, 0), Error);
}

TEST(Snippets, PaperLadderMinutes) {
    Dataset ds;
    for (int i = 0; i < 93; ++i) {
        AudioBuffer a;
        a.sample_rate = 100;
        a.samples.assign(3000, 0.0);
        ds.excerpts.push_back({"e" + std::to_string(i), "e" + std::to_string(i), a, {}});
    }
    const auto split = split_train_test(93, 0);
    const std::vector<std::string> expected{"0.67", "1.50", "3.00", "6.17", "9.17", "12.33"};
    for (std::size_t k = 0; k < paper_subsets().size(); ++k) {
        const auto s = make_snippets(ds, split.train, paper_subsets()[k], Mode::tcn);
        EXPECT_EQ(minutes_label(s.annotated_seconds / 60.0), expected[k]);
        EXPECT_EQ(s.train.size(), static_cast<std::size_t>(paper_subsets()[k]));
        for (std::size_t i = 0; i < s.train.size(); ++i) {
            EXPECT_EQ(s.train[i].source, s.val[i].source);
            EXPECT_DOUBLE_EQ(s.train[i].end, s.val[i].begin);  // adjacent, non-overlapping
            EXPECT_DOUBLE_EQ(s.train[i].begin, 0.0);
            EXPECT_DOUBLE_EQ(s.val[i].end, 10.0);
        }
        const auto b = make_snippets(ds, split.train, paper_subsets()[k], Mode::bayes);
        EXPECT_TRUE(b.val.empty());
        EXPECT_DOUBLE_EQ(b.train.front().end, 10.0);
    }
    // nested: every smaller subset is a prefix of the larger one
    const auto small = make_snippets(ds, split.train, 9, Mode::tcn), large = make_snippets(ds, split.train, 37, Mode::tcn);
    for (std::size_t i = 0; i < small.train.size(); ++i) EXPECT_EQ(small.train[i].source, large.train[i].source);

    const auto all = make_snippets(ds, split.train, all_tracks, Mode::tcn);
    EXPECT_EQ(all.train.size() + all.val.size(), 74u);
    EXPECT_EQ(all.val.size(), 19u);  // 25 % of 74, rounded
    EXPECT_DOUBLE_EQ(all.train.front().end, 30.0);
    EXPECT_THROW(make_snippets(ds, split.train, 75, Mode::tcn), Error);
}

TEST(Snippets, ShortExcerptIsAnError) {
    Dataset ds;
    AudioBuffer a;
    a.sample_rate = 100;
    a.samples.assign(800, 0.0);
    for (int i = 0; i < 5; ++i) ds.excerpts.push_back({"e" + std::to_string(i), "", a, {}});
    EXPECT_THROW(make_snippets(ds, {0, 1, 2, 3}, 2, Mode::bayes), Error);
}

TEST(Strategies, ParseAndPrint) {
    EXPECT_EQ(parse_strategy("fsa"), Strategy::fsa);
    EXPECT_EQ(parse_strategy("BAYES"), Strategy::bayes);
    EXPECT_THROW(parse_strategy("lstm"), Error);
    EXPECT_EQ(parse_subset("all"), all_tracks);
    EXPECT_EQ(parse_subset("37"), 37);
    EXPECT_THROW(parse_subset("-3"), Error);
}

TEST(RunStrategy, BayesAndTcnOnSmallDataset) {
    const auto ds = small_dataset(10, 12.0);
    const auto cfg = tiny_config();
    FeatureCache cache(ds, cfg.features);
    Context ctx{ds, cfg, cache, std::nullopt};

    const auto bayes = run_strategy(Strategy::bayes, 4, 0, ctx);
    EXPECT_EQ(bayes.tracks.size(), 2u);
    EXPECT_GT(bayes.train_seconds, 0.0);
    EXPECT_GT(mean_beat_f(bayes), 0.9);
    EXPECT_TRUE(leaked_ids(bayes).empty());

    const auto fs1 = run_strategy(Strategy::fs, 4, 0, ctx);
    const auto fs2 = run_strategy(Strategy::fs, 4, 0, ctx);
    EXPECT_EQ(results_csv({fs1}), results_csv({fs2}));
    EXPECT_EQ(fs1.tracks.size(), 2u);
    EXPECT_EQ(fs1.snippets_per_epoch, 4u);
    EXPECT_EQ(fs1.val_sources.size(), 4u);

    const auto fsa = run_strategy(Strategy::fsa, 4, 0, ctx);
    EXPECT_EQ(fsa.snippets_per_epoch, 5 * fs1.snippets_per_epoch);
    EXPECT_THROW(run_strategy(Strategy::ft, 4, 0, ctx), Error);

    ctx.pretrained = tcn::init_weights<float>(cfg.tcn);
    const auto ft = run_strategy(Strategy::ft, 4, 0, ctx);
    const auto fta = run_strategy(Strategy::fta, 4, 0, ctx);
    EXPECT_EQ(fta.snippets_per_epoch, 5 * ft.snippets_per_epoch);
    EXPECT_EQ(ft.history[0].lr, 0.001);
}

TEST(RunMatrix, CountsFailuresAndDeterminism) {
    const auto ds = small_dataset(8, 10.0);
    auto cfg = tiny_config();
    FeatureCache cache(ds, cfg.features);
    Context ctx{ds, cfg, cache, std::nullopt};
    const std::vector<Strategy> st{Strategy::bayes, Strategy::fs};
    const std::vector<int> subsets{2, 4, 9};  // 9 exceeds the 6 training excerpts
    const auto a = run_matrix(st, subsets, {0, 1}, ctx, 1);
    ASSERT_EQ(a.size(), 12u);
    std::size_t failed = 0;
    for (const auto& r : a) {
        if (!r.ok()) {
            ++failed;
            EXPECT_EQ(r.n_tracks, 9);
            continue;
        }
        EXPECT_EQ(r.tracks.size(), r.test_ids.size());
        EXPECT_TRUE(leaked_ids(r).empty());
    }
    EXPECT_EQ(failed, 4u);
    const auto b = run_matrix(st, subsets, {0, 1}, ctx, 2);
    EXPECT_EQ(results_csv(a), results_csv(b));
    EXPECT_EQ(plotdata_perf_csv(aggregate(a, 50)), plotdata_perf_csv(aggregate(b, 50)));

    const auto csv = results_csv(a);
    // 8 ok cells x 2 test tracks x 2 tasks, plus the header
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 8 * 2 * 2);
    const auto runs = runs_csv(a);
    EXPECT_NE(runs.find("failed"), std::string::npos);

    const auto agg = aggregate(a, 50);
    EXPECT_EQ(agg.size(), 2u * 2u * 2u * 3u);  // strategies x subsets x tasks x metrics
    for (const auto& g : agg) EXPECT_EQ(g.seeds, 2u);
}

TEST(Leakage, DetectsOverlap) {
    RunRecord r;
    r.train_sources = {"a", "b"};
    r.val_sources = {"c"};
    r.test_ids = {"c", "d"};
    EXPECT_EQ(leaked_ids(r), std::vector<std::string>{"c"});
}
