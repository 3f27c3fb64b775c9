"""Smoke test for the `srsad` extension module.

Build first:  cargo build --release -p srsad-python --features extension-module
Then run:     python3 python/smoke_test.py [path/to/libsrsad.so]
"""

import importlib.util
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    if len(sys.argv) > 1:
        return Path(sys.argv[1])
    for profile in ("release", "debug"):
        for name in ("libsrsad.so", "libsrsad.dylib", "srsad.dll"):
            p = ROOT / "target" / profile / name
            if p.exists():
                return p
    sys.exit("extension not built; see the module docstring")


def load(lib):
    tmp = Path(tempfile.mkdtemp())
    dest = tmp / ("srsad.pyd" if lib.suffix == ".dll" else "srsad.so")
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("srsad", dest)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod, tmp


def main():
    srsad, tmp = load(find_library())

    sr = 16000
    tone = [0.5 * math.sin(2 * math.pi * 440 * i / sr) for i in range(2 * sr)]
    feats = srsad.logmel(tone, 16)
    assert len(feats) == 126 and len(feats[0]) == 16

    model = srsad.Model("tiny", seed=1)
    probs = model.forward(feats)
    assert len(probs) == 126 and all(0.0 <= p <= 1.0 for p in probs)
    assert model.param_count == srsad.count_params(model.config)

    path = str(tmp / "tiny.srw")
    model.save(path)
    assert srsad.Model.load(path).forward(feats) == probs

    det = srsad.Detector.load(path)
    scores = det.score(tone * 3, chunk_len_s=2.0)
    assert len(scores) == 3 * 2 * sr // 256 + 1
    assert len(srsad.decisions(scores, 0.5, 0.3)) == len(scores)

    assert srsad.count_macs("default-lc") < srsad.count_macs("default")
    assert srsad.auc([0.9, 0.8, 0.1], [True, True, False]) == 1.0
    assert srsad.auc_sirr([0.1, 0.2, 0.9], [True, True, False], [False, False, True]) == 0.0
    assert abs(srsad.loudness_lkfs(tone) - srsad.loudness_lkfs([x / 2 for x in tone]) - 20 * math.log10(2)) < 0.05

    try:
        srsad.Model("huge")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    assert srsad.run_cli(["complexity", "--model", "tiny", "--rtf-reps", "0", "--out", str(tmp / "cx")]) == 0
    shutil.rmtree(tmp)
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
