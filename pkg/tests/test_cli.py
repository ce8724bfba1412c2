import json

import pytest

from hashscope.cli import main, parse_config_file
from hashscope.corpus import Corpus, PostRecord, save_corpus, save_friendships
from hashscope.reports import report_stats
from hashscope.synth import SyntheticSpec, generate_synthetic

from conftest import ts


def run_cli(args):
    return main(args)


def small_corpus_files(tmp_path, spec=None):
    spec = spec or SyntheticSpec(users=60, hashtags=100, posts=4000, years=4,
                                 communities=5, homophily=0.7, located_rate=0.5,
                                 friends_per_user=6.0, zipf_exponent=0.5, seed=3)
    corpus = generate_synthetic(spec)
    posts = tmp_path / "corpus.jsonl"
    friends = tmp_path / "friends.csv"
    save_corpus(corpus, posts)
    save_friendships(corpus.friendships, friends)
    locations = None
    if corpus.location_categories:
        from hashscope.corpus import save_location_categories
        locations = tmp_path / "locations.csv"
        save_location_categories(corpus.location_categories, locations)
    return posts, friends, locations


class TestSynthCommand:
    def test_same_seed_identical_files(self, tmp_path):
        for name in ("one", "two"):
            code = run_cli(["synth", "--seed", "1", "--users", "40", "--hashtags", "60",
                            "--posts", "1500", "--periodic", "6", "--rising", "10",
                            "--stable", "6", "--meteor", "4", "--communities", "4",
                            "--drifted", "2", "--out", str(tmp_path / name / "c.jsonl")])
            assert code == 0
        base = (tmp_path / "one" / "c.jsonl").read_bytes()
        assert base == (tmp_path / "two" / "c.jsonl").read_bytes()
        f1 = (tmp_path / "one" / "c.jsonl.friends.csv").read_bytes()
        f2 = (tmp_path / "two" / "c.jsonl.friends.csv").read_bytes()
        assert f1 == f2

    def test_infeasible_spec_fails_cleanly(self, tmp_path, capsys):
        code = run_cli(["synth", "--hashtags", "5", "--periodic", "10",
                        "--out", str(tmp_path / "c.jsonl")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestStatsCommand:
    def test_three_post_counts(self, tmp_path, capsys):
        posts = [
            PostRecord("a", ts(2013, 2), frozenset({"x", "y"})),
            PostRecord("a", ts(2013, 5), frozenset({"x"})),
            PostRecord("b", ts(2013, 8), frozenset()),
        ]
        path = tmp_path / "c.jsonl"
        save_corpus(Corpus(posts=posts), path)
        out = tmp_path / "out"
        assert run_cli(["stats", "--input", str(path), "--out", str(out)]) == 0
        report = json.loads((out / "stats.json").read_text())
        assert report["n_posts"] == 3
        assert report["n_users"] == 2
        assert report["n_hashtags"] == 2
        assert report["n_hashtag_instances"] == 3

    def test_missing_input_diagnostic(self, tmp_path, capsys):
        code = run_cli(["stats", "--input", str(tmp_path / "nope.jsonl"),
                        "--out", str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_input_flag_required(self, tmp_path, capsys):
        code = run_cli(["stats", "--out", str(tmp_path / "out")])
        assert code == 1


class TestConfigResolution:
    def test_config_file_parsed(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nseed = 5\ntop_k = 25\n")
        assert parse_config_file(cfg) == {"seed": 5, "top_k": 25}

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mystery = 1\n")
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config_file(cfg)

    def test_cli_overrides_config_file(self, tmp_path):
        posts, friends, _ = small_corpus_files(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 5\n")
        out = tmp_path / "out"
        code = run_cli(["stats", "--input", str(posts), "--config", str(cfg),
                        "--seed", "7", "--out", str(out)])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["settings"]["seed"] == 7

    def test_config_file_overrides_default(self, tmp_path):
        posts, friends, _ = small_corpus_files(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 5\n")
        out = tmp_path / "out"
        run_cli(["stats", "--input", str(posts), "--config", str(cfg),
                 "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["settings"]["seed"] == 5

    def test_unknown_flag_exits_nonzero(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli(["stats", "--wat", "1", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestPipelineCommands:
    def test_temporal_artifacts(self, tmp_path):
        spec = SyntheticSpec(users=80, hashtags=90, posts=6000, years=4,
                             periodic=12, rising=12, stable=12, meteor=12,
                             zipf_exponent=0.5, seed=4)
        posts, _, _ = small_corpus_files(tmp_path, spec)
        out = tmp_path / "out"
        code = run_cli(["temporal", "--input", str(posts), "--out", str(out),
                        "--top-k", "80", "--k-min", "2", "--k-max", "5",
                        "--restarts", "3", "--seed", "1"])
        assert code == 0
        assert (out / "temporal_clusters.csv").exists()
        assert (out / "temporal_centroids.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert sorted(manifest["artifacts"]) == [
            "temporal_centroids.json", "temporal_clusters.csv"]

    def test_spatial_artifacts(self, tmp_path):
        posts, _, locations = small_corpus_files(tmp_path)
        out = tmp_path / "out"
        code = run_cli(["spatial", "--input", str(posts), "--locations",
                        str(locations), "--out", str(out)])
        assert code == 0
        assert (out / "spatial_propensity.csv").exists()

    def test_drift_artifacts(self, tmp_path):
        spec = SyntheticSpec(users=60, hashtags=80, posts=5000, years=2,
                             communities=4, zipf_exponent=0.5, seed=5)
        posts, _, _ = small_corpus_files(tmp_path, spec)
        out = tmp_path / "out"
        code = run_cli(["drift", "--input", str(posts), "--out", str(out),
                        "--dimension", "16", "--epochs", "2", "--top-k", "50",
                        "--min-count", "3", "--seed", "2"])
        assert code == 0
        for name in ("drift_displacement.csv", "drift_scatter.csv",
                     "drift_summary.json"):
            assert (out / name).exists()

    def test_social_artifacts(self, tmp_path):
        posts, friends, _ = small_corpus_files(tmp_path)
        out = tmp_path / "out"
        code = run_cli(["social", "--input", str(posts), "--friends", str(friends),
                        "--out", str(out), "--walk-times", "4", "--walk-length", "10",
                        "--profile-dim", "16", "--social-epochs", "2", "--seed", "3"])
        assert code == 0
        assert (out / "social_pairs.csv").exists()
        summary = json.loads((out / "social_summary.json").read_text())
        assert set(summary["auc"]) == {"profile", "common", "jaccard", "preferential"}

    def test_outputs_confined_to_out_dir(self, tmp_path):
        posts, friends, _ = small_corpus_files(tmp_path)
        out = tmp_path / "only_here"
        before = set(tmp_path.rglob("*"))
        run_cli(["stats", "--input", str(posts), "--out", str(out)])
        created = set(tmp_path.rglob("*")) - before
        for path in created:
            assert str(path).startswith(str(out))


class TestAllCommand:
    def test_generates_and_runs_every_pipeline(self, tmp_path):
        out = tmp_path / "all"
        code = run_cli([
            "all", "--out", str(out), "--seed", "2",
            "--users", "80", "--hashtags", "120", "--posts", "6000",
            "--years-span", "4", "--periodic", "8", "--rising", "8",
            "--stable", "8", "--meteor", "8", "--communities", "5",
            "--drifted", "3", "--homophily", "0.7", "--located-rate", "0.5",
            "--top-k", "100", "--k-max", "5", "--restarts", "3",
            "--dimension", "16", "--epochs", "2", "--min-count", "3",
            "--walk-times", "4", "--walk-length", "10", "--profile-dim", "16",
            "--social-epochs", "2",
        ])
        assert code == 0
        for name in ("corpus.jsonl", "stats.json", "temporal_clusters.csv",
                     "spatial_propensity.csv", "drift_displacement.csv",
                     "social_summary.json", "manifest.json"):
            assert (out / name).exists(), name


class TestStatsReport:
    def test_half_no_hashtag_histogram(self):
        posts = []
        for i in range(10):
            tags = frozenset({"x"}) if i % 2 == 0 else frozenset()
            posts.append(PostRecord("u", ts(2013) + i * 86400, tags))
        report = report_stats(Corpus(posts=posts))
        assert report.hashtag_count_histogram[0] == pytest.approx(0.5)
        assert report.hashtag_count_histogram[1] == pytest.approx(0.5)

    def test_single_post_corpus(self):
        report = report_stats(Corpus(posts=[PostRecord("u", ts(2013), frozenset({"x"}))]))
        assert report.n_posts == 1
        assert report.adoption[0]["post_proportion"] == 1.0

    def test_growth_corpus_monotone_adoption(self):
        spec = SyntheticSpec(users=150, hashtags=100, posts=20000, years=4,
                             adoption_growth=True, seed=6)
        corpus = generate_synthetic(spec)
        report = report_stats(corpus)
        proportions = [row["post_proportion"] for row in report.adoption]
        assert len(proportions) == 16
        assert all(b > a for a, b in zip(proportions, proportions[1:]))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            report_stats(Corpus(posts=[]))

    def test_top_hashtags_ranked(self, three_post_corpus):
        report = report_stats(three_post_corpus, top_k=5)
        assert report.top_hashtags[0][0] in ("sea", "sun")
        assert report.top_hashtags[0][1] == 2
