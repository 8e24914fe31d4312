"""Smoke test for the allserp Python extension.

Uses an installed `allserp` module if there is one, otherwise loads the
library built by `cargo build -p allserp-py [--release]` from target/.
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import allserp

        return allserp
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("liballserp.so", "liballserp.dylib", "allserp.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("allserp", str(path))
                spec = importlib.util.spec_from_file_location("allserp", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("allserp extension not found; run `cargo build -p allserp-py` first")


def main():
    allserp = load()

    assert allserp.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert abs(allserp.iou((0, 0, 10, 10), (5, 0, 10, 10)) - 1 / 3) < 1e-12
    assert allserp.spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
    assert allserp.spearman([1, 2], [1, 2]) is None
    ttr, overlap = allserp.snippet_features("cheap flights cheap", "cheap hotels")
    assert abs(ttr - 2 / 3) < 1e-12 and overlap == 0.5

    a = allserp.Aoi("t#00", "organic", 160, 100, 540, 80, 0)
    b = allserp.Aoi("t#01", "organic", 160, 200, 540, 80, 1)
    assert allserp.attribute_point([a, b], 300, 150) == ("t#00", "strict")
    assert allserp.attribute_point([a, b], 157, 150) == ("t#00", "tolerance")
    assert allserp.attribute_point([a, b], 1200, 150) == (None, "miss")
    filled = allserp.gapfill([a, b])
    assert [(f.y, f.h, f.source) for f in filled] == [(100, 90, "gapfill_extension"), (190, 90, "gapfill_extension")]
    try:
        allserp.Aoi("x", "banner", 0, 0, 1, 1, 0)
        raise AssertionError("bad etype accepted")
    except ValueError:
        pass

    html = '<div id="rso"><div class="g"><h3>T</h3><cite>c</cite></div><div class="card">?</div></div>'
    assert allserp.classify_html(html) == [("organic", 5), ("unknown_widget", 8)]

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        assert allserp.synth(str(tmp / "in"), n=4, seed=1) == 4
        doc = allserp.process_trial_dir(str(tmp / "in" / "syn-0000"))
        assert doc["trial_id"] == "syn-0000" and set(doc["flavors"]) == {"typed", "typed_gapfill", "organic_hybrid"}
        summary = allserp.build(str(tmp / "in"), str(tmp / "out"), jobs=2)
        assert summary["n_processed"] == 4 and summary["n_failed"] == 0
        on_disk = json.loads((tmp / "out" / "run_summary.json").read_text())
        assert on_disk == summary
        assert allserp.summarize(str(tmp / "in"))["n_processed"] == 4

    print("allserp", allserp.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
