import io
import json
from pathlib import Path

import pytest

from mosskit.cli import main
from mosskit.fixtures import fixture_path

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def golden(name):
    return (GOLDEN / name).read_text(encoding="utf-8")


@pytest.fixture
def bad_chart(tmp_path):
    doc = json.loads(fixture_path("slice-fragment").read_text(encoding="utf-8"))
    doc["differentials"][0]["target"] = "α₁"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
    return str(p)


@pytest.fixture
def broken_dga(tmp_path):
    from mosskit.dga import dga_to_dict
    from mosskit.fixtures import toy_dga

    d = dga_to_dict(toy_dga())
    d["d"]["x²"] = [[1, "x"]]  # lowers filtration and breaks d∘d = 0
    p = tmp_path / "dga.json"
    p.write_text(json.dumps(d, ensure_ascii=False), encoding="utf-8")
    return str(p)


# -- exit-code matrix --------------------------------------------------------

@pytest.mark.parametrize("argv,code", [
    (["validate", "slice-fragment"], 0),
    (["validate", "toy-dga"], 0),
    (["validate", "hz2n"], 0),
    (["pages", "toy-dga", "--max-page", "3"], 0),
    (["massey", "slice-fragment", "--page", "1", "--a", "2", "--a2", "ρ²", "--a3", "τα₁"], 0),
    (["massey", "slice-fragment", "--page", "1", "--a", "τ²", "--a2", "2", "--a3", "2"], 1),
    (["massey", "slice-fragment", "--page", "1", "--a", "β", "--a2", "2", "--a3", "2"], 2),
    (["crossing", "slice-fragment", "--page", "1", "--stem", "0", "--filtration", "0", "--weight", "-2"], 0),
    (["deduce", "slice-fragment", "--rule", "moss-e1"], 0),
    (["deduce", "slice-fragment", "--rule", "shuffle"], 1),
    (["deduce", "slice-fragment", "--rule", "shuffle", "--auxiliary"], 0),
    (["deduce", "slice-fragment", "--rule", "moss-e1", "--inputs", "τα₁", "ρ²", "2"], 1),
    (["oracle", "--seeds", "3"], 0),
    (["render", "slice-fragment", "--format", "ascii"], 0),
    (["report", "slice-fragment", "--auxiliary"], 0),
    (["report", "slice-fragment"], 0),
    (["validate", "no-such-fixture"], 2),
    (["pages", "slice-fragment", "--bogus"], 2),
    (["frobnicate"], 2),
    ([], 2),
    (["render", "slice-fragment", "--format", "png"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv, out=io.StringIO()) == code


def test_bad_chart_is_validation_failure(bad_chart):
    code, out = run("validate", bad_chart)
    assert code == 1
    assert out.startswith("$.differentials[0]: ") and "τ²" in out


def test_broken_dga_is_validation_failure(broken_dga):
    code, out = run("validate", broken_dga)
    assert code == 1
    assert "filtration" in out


def test_usage_error_prints_help(capsys):
    assert main(["pages", "slice-fragment", "--bogus"], out=io.StringIO()) == 2
    err = capsys.readouterr().err
    assert "usage:" in err


# -- outputs -----------------------------------------------------------------

def test_massey_output():
    code, out = run("massey", "slice-fragment", "--page", "1", "--a", "2", "--a2", "ρ²", "--a3", "τα₁")
    assert out.strip() == "⟨2, ρ², τα₁⟩ = {2τ²} (strict)"


def test_crossing_vacuous_output():
    code, out = run("crossing", "slice-fragment", "--page", "1", "--stem", "0", "--filtration", "0",
                    "--weight", "-2")
    assert out.strip() == "holds (vacuous)"


def test_oracle_output():
    code, out = run("oracle", "--seeds", "4", "--dim", "12")
    first = out.splitlines()[0]
    assert first.startswith("applicable: ") and first.endswith(", fail: 0")
    k = int(first.split(",")[0].split(": ")[1])
    assert first == f"applicable: {k}, pass: {k}, fail: 0"


def test_shuffle_needs_flag_message(capsys):
    code, out = run("deduce", "slice-fragment", "--rule", "shuffle")
    assert code == 1
    assert "--auxiliary" in out + capsys.readouterr().err


def test_deduce_log_and_replay(tmp_path):
    log = tmp_path / "log.jsonl"
    code, _ = run("deduce", "slice-fragment", "--auxiliary", "--log", str(log))
    assert code == 0
    lines = log.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 6
    code, out = run("deduce", "slice-fragment", "--auxiliary", "--replay", str(log))
    assert code == 0
    rec = json.loads(lines[2])
    rec["status"] = "refused"
    lines[2] = json.dumps(rec, ensure_ascii=False, sort_keys=True)
    log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    code, out = run("deduce", "slice-fragment", "--auxiliary", "--replay", str(log))
    assert code == 1


def test_deduce_with_fact_file(tmp_path):
    facts = tmp_path / "facts.json"
    facts.write_text(json.dumps([{"kind": "PermanentCycle", "element": "τ²"}], ensure_ascii=False),
                     encoding="utf-8")
    code, _ = run("deduce", "slice-fragment", "--rule", "moss-e1", "--facts", str(facts))
    assert code == 1


def test_render_to_file(tmp_path):
    p = tmp_path / "e1.svg"
    code, out = run("render", "slice-fragment", "--format", "svg", "-o", str(p))
    assert code == 0 and out == ""
    assert p.read_text(encoding="utf-8") == golden("render_slice_e1.svg")


# -- golden files ------------------------------------------------------------

@pytest.mark.parametrize("name,argv", [
    ("explain_nu.txt", ["deduce", "slice-fragment", "--rule", "moss-e1", "--inputs", "α₁", "2", "α₁", "--explain"]),
    ("plan_slice.txt", ["deduce", "slice-fragment", "--auxiliary"]),
    ("render_slice_e1.txt", ["render", "slice-fragment", "--format", "ascii"]),
    ("render_slice_e2.txt", ["render", "slice-fragment", "--format", "ascii", "--page", "2"]),
    ("render_slice_e1.svg", ["render", "slice-fragment", "--format", "svg"]),
    ("report_slice.md", ["report", "slice-fragment", "--auxiliary"]),
])
def test_golden(name, argv):
    code, out = run(*argv)
    assert code == 0
    assert out == golden(name)
    assert run(*argv)[1] == out


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    root = ET.fromstring(golden("render_slice_e1.svg").split("\n", 1)[1])
    assert root.tag.endswith("svg") and root.get("version") == "1.1"
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}circle")) == 9
    arrows = [e for e in root.findall(f"{ns}line") if e.get("marker-end")]
    assert [a.find(f"{ns}title").text for a in arrows] == ["d_1(τ²) = ρ²τα₁"]
