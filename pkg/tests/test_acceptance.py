"""Acceptance gate: one test per shipping criterion.

Each test prints a single [PASS]/[FAIL] line with the measured numbers
(visible under `pytest -s`) and then asserts, so a red run still reports
every measurement. Tolerances are frozen here on purpose; loosening them
is a behavior change, not a test fix.
"""

import time
import warnings

import numpy as np
import pytest

from helpers import float32_model, make_noise, make_sine, write_corpus
from latentaudio import (
    AudioBuffer,
    LatentStats,
    SynthesisMode,
    Thumbnail,
    VaeHyperParams,
    decode_path,
    encode_audio,
    generate_curve,
    gradient_check,
    kl_divergence,
    load_checkpoint,
    load_som,
    load_wav,
    meso_interpolate,
    extended_interpolate,
    save_checkpoint,
    save_som,
    save_wav,
    stepwise_interpolate,
    train,
    train_som,
    window,
)
from latentaudio.cli import main, run_bench

MEAN = SynthesisMode.mean_only()


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def default_model():
    # untrained but full-size: identities and latency depend only on shape
    return float32_model(VaeHyperParams(seed=0))


@pytest.fixture(scope="module")
def pair_44k():
    a = make_sine(freq=330.0, seconds=0.2, rate=44100)
    b = make_noise(seconds=0.2, rate=44100, seed=3)
    return a, b


def _reconstruction(model, buf, hop=None):
    hop = hop or model.hyper.window_size
    path = encode_audio(model, buf, hop)
    return decode_path(model, path.means(), np.zeros_like(path.means()), MEAN)


def test_gradients_match_finite_differences():
    start = time.perf_counter()
    hyper = VaeHyperParams(
        window_size=8, latent_dim=2, hidden_sizes=(4,), sample_rate=8000, seed=0
    )
    report = gradient_check(hyper, tolerance=1e-3, n_samples=120, seed=0)
    elapsed = time.perf_counter() - start
    ok = report.passed and report.n_checked >= 100 and elapsed < 10.0
    _report(
        "gradient check",
        ok,
        f"max rel err {report.max_rel_error:.2e} over {report.n_checked} "
        f"parameters in {elapsed:.1f}s (limit 1e-3, 100, 10s)",
    )


def test_kl_matches_monte_carlo():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(20):
        mu = rng.uniform(-2.0, 2.0, 4)
        logvar = rng.uniform(-1.0, 1.0, 4)
        closed = kl_divergence(LatentStats(mu, logvar))
        sigma = np.exp(logvar / 2.0)
        draw_rng = np.random.default_rng(trial)
        z = mu + sigma * draw_rng.standard_normal((1_000_000, 4))
        log_q = -0.5 * ((z - mu) / sigma) ** 2 - 0.5 * logvar
        log_p = -0.5 * z**2
        estimate = float(np.mean(np.sum(log_q - log_p, axis=1)))
        worst = max(worst, abs(closed - estimate) / closed)
    elapsed = time.perf_counter() - start
    ok = worst < 0.01 and elapsed < 30.0
    _report(
        "KL closed form vs Monte-Carlo",
        ok,
        f"worst relative gap {worst:.4%} over 20 draws of 1e6 in {elapsed:.1f}s "
        f"(limit 1%, 30s)",
    )


def test_training_reduces_reconstruction_loss():
    start = time.perf_counter()
    hyper = VaeHyperParams(epochs=200, seed=0)
    sine = make_sine(freq=440.0, seconds=(1024 + 199 * 256) / 44100.0, rate=44100)
    ws = window(sine, hyper.window_size, 256)
    assert len(ws) == 200
    ckpt = train([ws], hyper)
    elapsed = time.perf_counter() - start
    history = ckpt.loss_history
    ratio = float(history[-1, 0] / history[0, 0])
    finite = bool(np.isfinite(history).all())
    ok = ratio < 0.25 and finite and elapsed < 300.0
    _report(
        "training sanity",
        ok,
        f"final/first reconstruction {ratio:.4f} (limit 0.25), "
        f"all losses finite={finite}, {elapsed:.0f}s of 300s",
    )


def test_blend_endpoints_reproduce_inputs(default_model, pair_44k):
    model = default_model
    a, b = pair_44k
    w = model.hyper.window_size
    n = (min(len(a), len(b)) - w) // w + 1
    recon_a = _reconstruction(model, a).samples
    recon_b = _reconstruction(model, b).samples

    meso_one = meso_interpolate(model, a, b, generate_curve("const:1", n), MEAN)
    meso_zero = meso_interpolate(model, a, b, generate_curve("const:0", n), MEAN)
    swept = stepwise_interpolate(model, a, b, 1.0, 1.0, MEAN)
    seg = n * w
    step_zero, step_one = swept.samples[:seg], swept.samples[seg:]

    checks = {
        "meso const 1 -> input 1": np.array_equal(meso_one.samples, recon_a),
        "meso const 0 -> input 2": np.array_equal(meso_zero.samples, recon_b),
        "stepwise w=1 -> input 1": np.array_equal(step_one, recon_a),
        "stepwise w=0 -> input 2": np.array_equal(step_zero, recon_b),
    }
    failed = [k for k, v in checks.items() if not v]
    _report(
        "endpoint identities",
        not failed,
        "all four endpoint blends sample-exact" if not failed else f"broken: {failed}",
    )


def test_segment_and_stretch_duration_laws(default_model, pair_44k):
    model = default_model
    a, b = pair_44k
    w = model.hyper.window_size
    n = (min(len(a), len(b)) - w) // w + 1

    counts = {}
    for r, s, expected in ((1.0, 0.5, 3), (1.0, 0.25, 5), (0.8, 0.2, 5)):
        out = stepwise_interpolate(model, a, b, r, s, MEAN)
        counts[(r, s)] = (len(out) // (n * w), expected)
    count_ok = all(got == want for got, want in counts.values())

    long_a = make_sine(freq=220.0, seconds=2.0, rate=44100)
    long_b = make_noise(seconds=2.0, rate=44100, seed=8)
    n_ext = (len(long_a) - w) // 256 + 1
    curve = generate_curve("lin:0:1", n_ext)
    stretched = extended_interpolate(model, long_a, long_b, curve, MEAN, hop=256)
    ratio = len(stretched) / len(long_a)
    length_ok = len(stretched) == n_ext * w
    ratio_ok = 3.9 <= ratio <= 4.0

    ok = count_ok and length_ok and ratio_ok and n_ext >= 10
    _report(
        "duration laws",
        ok,
        f"segment counts {dict((k, v[0]) for k, v in counts.items())} "
        f"(want 3/5/5); stretched {n_ext} windows -> {len(stretched)} samples, "
        f"{ratio:.3f}x input (band 3.9-4.0)",
    )


def test_decode_latency_budget(default_model):
    report = run_bench(default_model, seconds=1.0, reps=50, warmup=5, seed=0)
    reference_met = report.median_ms < 10.0
    ok = report.n_windows == 44 and report.median_ms < 50.0
    _report(
        "decode latency",
        ok,
        f"{report.n_windows} windows, median {report.median_ms:.3f} ms, "
        f"p95 {report.p95_ms:.3f} ms over {report.reps} reps; "
        f"10 ms reference {'met' if reference_met else 'missed'}, 50 ms ceiling",
    )


def test_som_organizes_blobs_and_converges():
    rng = np.random.default_rng(42)
    direction = rng.standard_normal(30)
    direction *= 5.0 / np.linalg.norm(direction)
    c1, c2 = -direction / 2, direction / 2
    blob1 = c1 + 0.1 * rng.standard_normal((50, 30))
    blob2 = c2 + 0.1 * rng.standard_normal((50, 30))
    data = np.vstack([blob1, blob2])
    thumbs = [Thumbnail(row, file_ref=str(i)) for i, row in enumerate(data)]

    som = train_som(thumbs, width=2, height=1, epochs=60, lr0=0.5, seed=1)
    z = som.standardize(data)
    centroids = [z[:50].mean(axis=0), z[50:].mean(axis=0)]
    intra = np.linalg.norm(z[:50] - centroids[0], axis=1)
    budget = 3.0 * (intra.mean() + intra.std())
    protos = som.prototypes.reshape(2, -1)
    dists = np.array([[np.linalg.norm(p - c) for c in centroids] for p in protos])
    picks = dists.argmin(axis=1)
    separated = set(picks) == {0, 1} and all(
        dists[i, picks[i]] < budget for i in range(2)
    )
    qe_drops = som.qe_history[-1] < som.qe_history[0]

    rng2 = np.random.default_rng(3)
    flat_data = rng2.standard_normal((40, 6)) * 2.0 + 1.0
    flat = [Thumbnail(row, file_ref=str(i)) for i, row in enumerate(flat_data)]
    one = train_som(flat, width=1, height=1, epochs=100, lr0=0.02, seed=3)
    mean_err = float(
        np.max(np.abs(one.prototypes[0, 0] - one.standardize(flat_data).mean(axis=0)))
    )

    ok = separated and qe_drops and mean_err < 1e-3
    _report(
        "map organization",
        ok,
        f"prototype-to-centroid {dists[0, picks[0]]:.2f}/{dists[1, picks[1]]:.2f} "
        f"(budget {budget:.2f}), qe {som.qe_history[0]:.3f}->{som.qe_history[-1]:.3f}, "
        f"1x1 mean error {mean_err:.2e} (limit 1e-3)",
    )


def test_artifacts_round_trip_and_regenerate(tmp_path):
    corpus = tmp_path / "corpus"
    write_corpus(corpus, rate=8000, n_files=4)
    failures = []

    # raw float32 WAV round trip
    rng = np.random.default_rng(0)
    wav_path = tmp_path / "probe.wav"
    original = AudioBuffer(rng.uniform(-1, 1, 5000).astype(np.float32), 8000)
    save_wav(original, wav_path)
    if not np.array_equal(load_wav(wav_path).samples, original.samples):
        failures.append("float32 wav")

    # model checkpoint save -> load -> save
    hyper = VaeHyperParams(
        window_size=64, latent_dim=8, hidden_sizes=(16,), epochs=2,
        batch_size=16, sample_rate=8000, seed=1,
    )
    ws = window(load_wav(sorted(corpus.glob("*.wav"))[0]), 64, 64)
    ckpt = train([ws], hyper)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(ckpt, p1)
    save_checkpoint(load_checkpoint(p1), p2)
    if p1.read_bytes() != p2.read_bytes():
        failures.append("checkpoint round trip")

    # SOM save -> load -> save
    thumbs = [
        Thumbnail(row, file_ref=str(i))
        for i, row in enumerate(np.random.default_rng(1).standard_normal((10, 6)))
    ]
    som = train_som(thumbs, width=2, height=2, epochs=5, seed=0)
    s1, s2 = tmp_path / "a.som", tmp_path / "b.som"
    save_som(som, s1)
    save_som(load_som(s1), s2)
    if s1.read_bytes() != s2.read_bytes():
        failures.append("map round trip")

    # every CLI artifact regenerates bit-exactly from its sidecar
    train_flags = [
        "--window-size", "64", "--latent-dim", "8", "--hidden-sizes", "16",
        "--epochs", "2", "--batch-size", "16", "--sample-rate", "8000",
        "--hop", "64", "--seed", "1",
    ]
    som_flags = [
        "--feat-rate", "8000", "--frame-size", "512", "--feat-hop", "256",
        "--width", "2", "--height", "2", "--som-epochs", "20", "--seed", "1",
    ]
    wavs = sorted(corpus.glob("*.wav"))
    model_path = tmp_path / "model.ckpt"
    map_path = tmp_path / "map.som"
    ext_path = tmp_path / "ext.wav"
    clusters_path = tmp_path / "clusters.txt"
    concat_path = tmp_path / "cluster.wav"
    csv_path = tmp_path / "latents.csv"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first_runs = [
            ["train", "--dataset-dir", str(corpus), "--out", str(model_path), *train_flags],
            ["synth", "extend", "--checkpoint", str(model_path), "--in1", str(wavs[0]),
             "--in2", str(wavs[1]), "--out", str(ext_path),
             "--mode", "sample", "--seed", "7", "--hop", "16"],
            ["som", "build", "--dataset-dir", str(corpus), "--out", str(map_path), *som_flags],
            ["som", "clusters", "--map", str(map_path), "--dataset-dir", str(corpus),
             "--out", str(clusters_path)],
            ["export-latents", "--checkpoint", str(model_path), "--input", str(wavs[0]),
             "--out", str(csv_path)],
        ]
        for argv in first_runs:
            assert main(argv) == 0, argv

        listing = clusters_path.read_text().splitlines()[0].partition(": ")[0]
        assert main(["som", "concat", "--map", str(map_path), "--dataset-dir", str(corpus),
                     "--unit", listing, "--out", str(concat_path)]) == 0

        regen_specs = [
            ("train", model_path, ["train"]),
            ("synth extend", ext_path, ["synth", "extend"]),
            ("som build", map_path, ["som", "build"]),
            ("som clusters", clusters_path, ["som", "clusters"]),
            ("som concat", concat_path, ["som", "concat"]),
            ("export-latents", csv_path, ["export-latents"]),
        ]
        for label, artifact, command in regen_specs:
            redo = tmp_path / ("redo_" + artifact.name)
            code = main([*command, "--config", str(artifact) + ".cfg", "--out", str(redo)])
            if code != 0 or redo.read_bytes() != artifact.read_bytes():
                failures.append(f"regenerate {label}")

    _report(
        "persistence and regeneration",
        not failures,
        "6 artifact classes regenerate bit-exactly; wav/checkpoint/map round-trip"
        if not failures
        else f"broken: {failures}",
    )
