import json

import pytest

from exposure_engine.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestIngestKb:
    def test_summary(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "ingest-kb", str(fixtures_dir / "kb_sample.json"))
        assert code == 0
        body = json.loads(out)
        assert body["nodes"] == 25
        assert body["edges"] == 20
        assert body["total_references"] == 13

    def test_missing_file_is_io_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "ingest-kb", str(tmp_path / "absent.json"))
        assert code == 2
        assert "i/o error" in err

    def test_invalid_kb_is_validation_error(self, capsys, fixtures_dir):
        code, _, err = run(capsys, "ingest-kb", str(fixtures_dir / "invalid" / "kb_dangling_edge.json"))
        assert code == 1
        assert "error" in err

    def test_byte_identical_across_runs(self, capsys, fixtures_dir):
        _, first, _ = run(capsys, "ingest-kb", str(fixtures_dir / "kb_sample.json"))
        _, second, _ = run(capsys, "ingest-kb", str(fixtures_dir / "kb_sample.json"))
        assert first == second


class TestValidateKb:
    def test_clean_kb(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "validate-kb", str(fixtures_dir / "kb_sample.json"))
        assert code == 0
        assert json.loads(out)["issues"] == []

    def test_error_issues_exit_one(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "validate-kb", str(fixtures_dir / "invalid" / "kb_dangling_edge.json"))
        assert code == 1
        issues = json.loads(out)["issues"]
        assert any(i["severity"] == "Error" for i in issues)


class TestProfileScore:
    def test_scores_emitted(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "profile", "score", str(fixtures_dir / "org_a_before.json"))
        assert code == 0
        body = json.loads(out)
        assert set(body["scores"]) == {"E", "T", "M", "U"}
        assert 0 <= body["likelihood"]["bounded"] < 1

    def test_params_file_respected(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "profile", "score", str(fixtures_dir / "org_a_before.json"),
                           "--params", str(fixtures_dir / "params_example.json"))
        assert code == 0

    def test_invalid_profile_exit_one(self, capsys, fixtures_dir):
        code, _, _ = run(capsys, "profile", "score",
                         str(fixtures_dir / "invalid" / "profile_negative_count.json"))
        assert code == 1


class TestRecommend:
    def test_with_explicit_kb(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "recommend", str(fixtures_dir / "org_a_before.json"),
                           "--kb", str(fixtures_dir / "kb_sample.json"))
        assert code == 0
        body = json.loads(out)
        assert body["recommendations"]
        scores = [r["score"] for r in body["recommendations"]]
        assert scores == sorted(scores, reverse=True)

    def test_csv_format_columns(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "recommend", str(fixtures_dir / "org_a_before.json"),
                           "--kb", str(fixtures_dir / "kb_sample.json"), "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "control,weight,coverage,score,attributes,verdict"
        assert len(lines) > 1

    def test_data_dir_env_fallback(self, capsys, fixtures_dir, tmp_path, monkeypatch):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        (data_dir / "kb.json").write_bytes((fixtures_dir / "kb_sample.json").read_bytes())
        monkeypatch.setenv("EXPOSURE_ENGINE_DATA_DIR", str(data_dir))
        code, out, _ = run(capsys, "recommend", str(fixtures_dir / "org_a_before.json"))
        assert code == 0

    def test_no_kb_anywhere(self, capsys, fixtures_dir, monkeypatch):
        monkeypatch.delenv("EXPOSURE_ENGINE_DATA_DIR", raising=False)
        code, _, err = run(capsys, "recommend", str(fixtures_dir / "org_a_before.json"))
        assert code == 1


class TestCluster:
    def test_cluster_fixture(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "cluster", str(fixtures_dir / "corpus_40.json"),
                           "--k-range", "2..8", "--seed", "0")
        assert code == 0
        body = json.loads(out)
        assert body["k"] == 4
        assert sorted(c["suggested_variable"] for c in body["clusters"]) == [
            "Exposure", "Motivation", "SystemsUpdate", "Traceability"]

    def test_deterministic_output(self, capsys, fixtures_dir):
        _, first, _ = run(capsys, "cluster", str(fixtures_dir / "corpus_40.json"), "--k-range", "2..8")
        _, second, _ = run(capsys, "cluster", str(fixtures_dir / "corpus_40.json"), "--k-range", "2..8")
        assert first == second

    def test_table_format(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "cluster", str(fixtures_dir / "corpus_40.json"),
                           "--k-range", "2..8", "--format", "table")
        assert code == 0
        assert "cluster" in out.splitlines()[0]
        assert "k=4" in out


class TestEvaluate:
    def test_reduction_row(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "evaluate",
                           str(fixtures_dir / "org_b_before.json"), str(fixtures_dir / "org_b_after.json"),
                           "--before-incidents", "100", "--after-incidents", "53")
        assert code == 0
        body = json.loads(out)
        assert body["outcome"]["Reduction in Incidents"] == "47%"
        assert body["outcome"]["Likelihood delta"] < 0


class TestReport:
    def test_csv_format(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "report", str(fixtures_dir / "org_a_before.json"), "--format", "csv")
        assert code == 0
        header = out.splitlines()[0]
        assert header == "metric_id,variable,raw,normalized,available,action"

    def test_json_format(self, capsys, fixtures_dir):
        code, out, _ = run(capsys, "report", str(fixtures_dir / "org_a_before.json"))
        assert code == 0
        body = json.loads(out)
        assert len(body["rows"]) == 22
