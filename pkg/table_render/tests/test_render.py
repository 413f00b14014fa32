"""Image rendering: coverage, determinism, row counts, CLI exit codes."""

import json
import subprocess
import sys
from pathlib import Path

import pytest
from PIL import Image

from table_render import (
    EmptyTable,
    RenderJob,
    Style,
    load_jobs,
    render_image,
    run_batch,
)

REPO_ROOT = Path(__file__).resolve().parent.parent.parent
TRANSFORMED_CORPUS = REPO_ROOT / "fixtures" / "transformed.jsonl"


def janet_record(instance_id="easy:janet:serialized:0", rows=11):
    columns = [
        {"key": "name", "display": "name", "kind": "name"},
        {"key": "eggs_per_day", "display": "Eggs_per_day", "kind": "given"},
        {"key": "eggs_eaten", "display": "Eggs_eaten", "kind": "given"},
        {"key": "eggs_for_muffins", "display": "Eggs_for_muffins", "kind": "given"},
        {"key": "price_per_egg", "display": "Price_per_egg", "kind": "given"},
    ]
    data = [["Janet", "16", "3", "4", "2"]] + [
        [f"Row{i}", str(10 + i), str(i % 5), str(i % 7), str(1 + i % 9)]
        for i in range(1, rows)
    ]
    return {
        "instance_id": instance_id,
        "table": {
            "columns": columns,
            "rows": [[{"v": v, "p": "given"} for v in row] for row in data],
        },
    }


def write_dataset(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")


def test_easy_table_renders_twelve_grid_rows(tmp_path):
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, [janet_record(rows=11)])
    jobs = load_jobs(dataset, tmp_path / "img")
    result = render_image(jobs[0])
    assert result["rows"] == 12  # header plus 11 data rows
    assert result["cols"] == 5
    with Image.open(result["path"]) as image:
        style = Style()
        expected = (int(5 * style.cell_width * style.dpi),
                    int(12 * style.cell_height * style.dpi))
        assert image.size == expected


def test_single_column_table_renders(tmp_path):
    record = {
        "instance_id": "solo",
        "table": {
            "columns": [{"key": "name", "display": "name", "kind": "name"}],
            "rows": [[{"v": "Janet", "p": "given"}]],
        },
    }
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, [record])
    result = render_image(load_jobs(dataset, tmp_path)[0])
    assert Path(result["path"]).exists()


def test_null_cells_render_without_error(tmp_path):
    record = janet_record()
    record["table"]["rows"][0][2] = {"v": None, "p": "null"}
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, [record])
    result = render_image(load_jobs(dataset, tmp_path)[0])
    assert Path(result["path"]).exists()


def test_rerender_same_job_identical_hash(tmp_path):
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, [janet_record()])
    job = load_jobs(dataset, tmp_path / "a")[0]
    first = render_image(job)
    second = render_image(job)
    assert first["sha256"] == second["sha256"]


def test_empty_table_raises():
    job = RenderJob("empty", [], [], Path("/tmp/never.png"))
    with pytest.raises(EmptyTable):
        render_image(job)


def test_batch_coverage_and_manifest(tmp_path):
    records = [janet_record(instance_id=f"inst:{i}", rows=3) for i in range(5)]
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, records)
    out = tmp_path / "img"
    jobs = load_jobs(dataset, out)
    results, failures = run_batch(jobs, out / "checksums.json")
    assert not failures
    manifest = json.loads((out / "checksums.json").read_text())
    assert manifest["count"] == 5
    assert set(manifest["images"]) == {f"inst:{i}" for i in range(5)}
    pngs = sorted(out.glob("*.png"))
    assert len(pngs) == 5


def test_cli_exit_codes(tmp_path):
    records = [janet_record(instance_id="inst:0", rows=2)]
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, records)
    out = tmp_path / "img"
    proc = subprocess.run(
        [sys.executable, "-m", "table_render",
         "--dataset", str(dataset), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "checksums.json").exists()

    broken = dict(records[0])
    broken = {"instance_id": "bad", "table": {"columns": [], "rows": []}}
    write_dataset(dataset, [records[0], broken])
    proc = subprocess.run(
        [sys.executable, "-m", "table_render",
         "--dataset", str(dataset), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "bad" in proc.stderr


def test_style_config_file(tmp_path):
    config = tmp_path / "style.json"
    config.write_text(json.dumps({"font_size": 14, "dpi": 72}))
    style = Style.from_file(config)
    assert style.font_size == 14
    assert style.dpi == 72
    assert style.cell_width == Style().cell_width


@pytest.mark.skipif(not TRANSFORMED_CORPUS.exists(),
                    reason="fixture corpus not present")
def test_c9_fixture_dataset_images(tmp_path):
    """Acceptance: every fixture instance renders with the right row count
    and a stable hash; the dataset arrives via the builder CLI only."""
    data_dir = tmp_path / "data"
    proc = subprocess.run(
        [sys.executable, "-m", "mathtab.cli", "build",
         "--corpus", str(TRANSFORMED_CORPUS), "--subset", "easy",
         "--out", str(data_dir), "--master-seed", "5"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    dataset = data_dir / "easy.jsonl"

    out = tmp_path / "img"
    jobs = load_jobs(dataset, out)
    results, failures = run_batch(jobs, out / "checksums.json")
    assert not failures
    assert len(results) == sum(1 for _ in open(dataset) if _.strip())
    for result in results:
        assert result["rows"] == 12  # header plus the 11 easy data rows
    rerun = [render_image(job) for job in jobs[:3]]
    for first, second in zip(results[:3], rerun):
        assert first["sha256"] == second["sha256"]
    manifest = json.loads((out / "checksums.json").read_text())
    assert manifest["count"] == len(results)
    print(f"[PASS] C9 rendering: {len(results)} images, stable hashes, "
          "12-row grids")


def test_ocr_spot_check_when_available(tmp_path):
    pytesseract = pytest.importorskip("pytesseract")
    dataset = tmp_path / "data.jsonl"
    write_dataset(dataset, [janet_record(rows=2)])
    result = render_image(load_jobs(dataset, tmp_path / "img")[0])
    with Image.open(result["path"]) as image:
        text = pytesseract.image_to_string(image)
    assert "Janet" in text


@pytest.mark.skipif(not TRANSFORMED_CORPUS.exists(),
                    reason="fixture corpus not present")
def test_primary_cli_render_images_subcommand(tmp_path):
    data_dir = tmp_path / "data"
    subprocess.run(
        [sys.executable, "-m", "mathtab.cli", "build",
         "--corpus", str(TRANSFORMED_CORPUS), "--subset", "easy",
         "--out", str(data_dir), "--master-seed", "5"],
        check=True, capture_output=True,
    )
    out = tmp_path / "img"
    proc = subprocess.run(
        [sys.executable, "-m", "mathtab.cli", "render-images",
         "--dataset", str(data_dir / "easy.jsonl"), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "checksums.json").exists()
    assert len(list(out.glob("*.png"))) > 0
