"""Training corpus construction: four partitions plus interleaved samples.

Builds (instruction, LQ) -> HQ restoration samples, three kinds of quality
assessment samples with synthetic ground truth, and analyze-then-restore
samples whose response is a four-part analysis followed by the target image.
Also owns the partition mixer and the line-per-record dataset manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

from restoriq import degrade, metrics
from restoriq.degrade import DegradationSpec, PipelineSpec, derive_seed
from restoriq.errors import CorpusError
from restoriq.imaging import load_png, quantize_8bit, save_png, validate_image

TASKS = ("iqa_score", "iqa_describe", "iqa_compare", "restore", "interleaved_restore")
PARTITIONS = ("iqa", "single", "multi", "high_order", "interleaved")
PARTITION_IDS = {name: i for i, name in enumerate(PARTITIONS)}

MANIFEST_FIELDS = (
    "partition",
    "task",
    "instruction",
    "lq_path",
    "hq_path",
    "response_text",
    "degradation_spec",
    "score",
)

# Degradation parameter draw ranges for corpus synthesis (assumed, configurable).
TRAIN_PARAM_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "blur": {"sigma": (0.5, 2.0)},
    "noise": {"sigma": (0.03, 0.15)},
    "jpeg": {"quality": (10.0, 60.0)},
    "lowlight": {"gamma": (1.2, 2.2), "gain": (0.4, 0.9)},
    "haze": {"transmission": (0.4, 0.85), "airlight": (0.7, 1.0)},
    "rain": {"amount": (0.2, 0.8)},
}

SCORE_PROMPTS = (
    "What is the quality score of this image?",
    "Rate the overall quality of this image.",
    "Give a quality score for this image.",
)
DESCRIBE_PROMPTS = (
    "Describe the degradations present in this image.",
    "What distortions affect this image?",
    "List the quality defects of this image.",
)
COMPARE_PROMPTS = (
    "The first image is the reference. Which candidate is closer to it, A or B?",
    "Compare candidates A and B against the reference image: which has higher quality?",
)
ANALYZE_PROMPTS = (
    "Enhance the input image. Briefly analyze its defects, outline the fixes, "
    "then apply them and return the improved image.",
    "Analyze the quality problems in this image, plan the corrections, then "
    "enhance it and return the result.",
    "Inspect this image for defects, state how to correct them, and produce "
    "the enhanced image.",
)

REMEDIES = {
    "blur": "deblurring",
    "noise": "denoising",
    "jpeg": "compression artifact removal",
    "lowlight": "brightening",
    "haze": "dehazing",
    "rain": "rain removal",
}


@dataclass
class TextSegment:
    text: str


@dataclass
class ImageSegment:
    image: np.ndarray
    role: str  # "input" or "target"


Segment = Union[TextSegment, ImageSegment]


@dataclass
class TrainingSample:
    condition: list[Segment]
    response: list[Segment]
    task: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise CorpusError(f"unknown task {self.task!r}")
        cond_imgs = [s for s in self.condition if isinstance(s, ImageSegment)]
        resp_imgs = [s for s in self.response if isinstance(s, ImageSegment)]
        resp_texts = [s for s in self.response if isinstance(s, TextSegment)]
        if not any(isinstance(s, TextSegment) for s in self.condition):
            raise CorpusError("condition must contain an instruction text segment")
        if self.task in ("restore", "interleaved_restore"):
            if len(cond_imgs) != 1 or len(resp_imgs) != 1:
                raise CorpusError(
                    f"{self.task} sample needs exactly one input and one target "
                    f"image, got {len(cond_imgs)} and {len(resp_imgs)}"
                )
        else:
            if len(cond_imgs) < 1:
                raise CorpusError(f"{self.task} sample needs at least one input image")
            if resp_imgs:
                raise CorpusError(f"{self.task} response must be text-only")
            if not resp_texts:
                raise CorpusError(f"{self.task} sample needs a text response")
        if not self.response:
            raise CorpusError("sample has an empty response")

    @property
    def instruction(self) -> str:
        return next(s.text for s in self.condition if isinstance(s, TextSegment))

    @property
    def response_text(self) -> str | None:
        for s in self.response:
            if isinstance(s, TextSegment):
                return s.text
        return None


# ---------------------------------------------------------------------------
# templates


def restore_instruction(specs_or_pipe) -> str:
    if isinstance(specs_or_pipe, PipelineSpec):
        return "enhance this mix-degraded image."
    kinds = ", ".join(spec.kind for spec in specs_or_pipe)
    return f"enhance this image with {kinds}"


def score_text(score: float) -> str:
    return f"The quality score is {score:.2f}."


def severity_word(s: float) -> str:
    if s < 1.0 / 3.0:
        return "mild"
    if s < 2.0 / 3.0:
        return "moderate"
    return "severe"


def describe_text(specs: Sequence[DegradationSpec]) -> str:
    if not specs:
        return "The image shows no visible degradation."
    parts = [f"{severity_word(degrade.severity(s))} {s.kind}" for s in specs]
    return f"The image shows {' and '.join(parts)}."


def compare_text(winner: str) -> str:
    loser = "B" if winner == "A" else "A"
    return f"Image {winner} has higher quality than image {loser}."


def analysis_text(specs: Sequence[DegradationSpec]) -> str:
    """Four-part analyze-then-restore response, markers (1)..(4) in order."""
    if specs:
        kinds = [s.kind for s in specs]
        defects = " and ".join(
            f"{severity_word(degrade.severity(s))} {s.kind}" for s in specs
        )
        plan = ", then ".join(REMEDIES[k] for k in kinds)
    else:
        defects = "no visible degradation"
        plan = "a light clean-up pass"
    return (
        "(1) The user wants this image enhanced. "
        f"(2) It shows {defects}. "
        f"(3) Apply {plan}. "
        "(4) The result should be a clean, natural image."
    )


# ---------------------------------------------------------------------------
# procedural source images


def procedural_texture(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded synthetic HQ image: smooth color fields plus soft shapes."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)
    img = np.zeros((height, width, 3), dtype=np.float64)
    for c in range(3):
        fieldv = rng.uniform(0.3, 0.7)
        for _ in range(3):
            fx, fy = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.05, 0.18)
            fieldv = fieldv + amp * np.sin(2.0 * np.pi * (fx * xx + fy * yy) + phase)
        img[:, :, c] = fieldv
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        ry, rx = rng.uniform(0.08, 0.3, size=2)
        color = rng.uniform(0.0, 1.0, size=3)
        d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        mask = np.clip(1.0 - d, 0.0, 1.0) ** 0.5  # hard-ish edge at the rim
        img = img * (1.0 - mask[:, :, None]) + color[None, None, :] * mask[:, :, None]
    return quantize_8bit(np.clip(img, 0.0, 1.0).astype(np.float32))


# ---------------------------------------------------------------------------
# sample builders


def make_restore_sample(
    hq: np.ndarray,
    spec_or_pipe: Union[Sequence[DegradationSpec], PipelineSpec],
    partition: str,
) -> TrainingSample:
    """Degrade hq per the spec(s) and pair it with the matching instruction."""
    hq = validate_image(hq)
    if isinstance(spec_or_pipe, PipelineSpec):
        lq = degrade.high_order(hq, spec_or_pipe)
        specs = list(spec_or_pipe.stages)
        pipe_dict = spec_or_pipe.to_dict()
    else:
        specs = list(spec_or_pipe)
        lq = degrade.compose(hq, specs)
        pipe_dict = PipelineSpec(stages=specs, downsample_factor=1).to_dict()
    lq = quantize_8bit(lq)
    return TrainingSample(
        condition=[TextSegment(restore_instruction(spec_or_pipe)), ImageSegment(lq, "input")],
        response=[ImageSegment(hq, "target")],
        task="restore",
        meta={"partition": partition, "specs": specs, "pipeline": pipe_dict},
    )


def make_iqa_sample(kind: str, **kw) -> TrainingSample:
    """Build one IQA sample; kind selects scoring, description, or comparison."""
    if kind == "score":
        return _make_score_sample(**kw)
    if kind == "describe":
        return _make_describe_sample(**kw)
    if kind == "compare":
        return _make_compare_sample(**kw)
    raise CorpusError(f"unknown iqa sample kind {kind!r}")


def _make_score_sample(
    hq: np.ndarray, specs: Sequence[DegradationSpec], prompt_idx: int = 0
) -> TrainingSample:
    specs = list(specs)
    img = quantize_8bit(degrade.compose(hq, specs)) if specs else validate_image(hq)
    score = 5.0 - 4.0 * degrade.combined_severity(specs)
    return TrainingSample(
        condition=[
            TextSegment(SCORE_PROMPTS[prompt_idx % len(SCORE_PROMPTS)]),
            ImageSegment(img, "input"),
        ],
        response=[TextSegment(score_text(score))],
        task="iqa_score",
        meta={"partition": "iqa", "specs": specs, "score": score},
    )


def _make_describe_sample(
    hq: np.ndarray, specs: Sequence[DegradationSpec], prompt_idx: int = 0
) -> TrainingSample:
    specs = list(specs)
    img = quantize_8bit(degrade.compose(hq, specs)) if specs else validate_image(hq)
    return TrainingSample(
        condition=[
            TextSegment(DESCRIBE_PROMPTS[prompt_idx % len(DESCRIBE_PROMPTS)]),
            ImageSegment(img, "input"),
        ],
        response=[TextSegment(describe_text(specs))],
        task="iqa_describe",
        meta={"partition": "iqa", "specs": specs},
    )


def _make_compare_sample(
    reference: np.ndarray,
    candidate_a: np.ndarray,
    candidate_b: np.ndarray,
    prompt_idx: int = 0,
) -> TrainingSample:
    """Verdict chosen by higher luma PSNR against the reference."""
    if reference is None:
        raise CorpusError("comparison sample requires a reference image")
    psnr_a = metrics.psnr_y(candidate_a, reference)
    psnr_b = metrics.psnr_y(candidate_b, reference)
    winner = "A" if psnr_a >= psnr_b else "B"
    return TrainingSample(
        condition=[
            TextSegment(COMPARE_PROMPTS[prompt_idx % len(COMPARE_PROMPTS)]),
            ImageSegment(validate_image(reference), "input"),
            ImageSegment(validate_image(candidate_a), "input"),
            ImageSegment(validate_image(candidate_b), "input"),
        ],
        response=[TextSegment(compare_text(winner))],
        task="iqa_compare",
        meta={"partition": "iqa", "winner": winner, "psnr_a": psnr_a, "psnr_b": psnr_b},
    )


def make_interleaved_sample(
    restore_sample: TrainingSample, prompt_idx: int = 0
) -> TrainingSample:
    """Wrap a restore sample with an analyze-then-restore prompt and analysis."""
    if restore_sample.task != "restore":
        raise CorpusError("make_interleaved_sample expects a restore sample")
    specs = restore_sample.meta.get("specs", [])
    lq = next(s for s in restore_sample.condition if isinstance(s, ImageSegment))
    hq = next(s for s in restore_sample.response if isinstance(s, ImageSegment))
    return TrainingSample(
        condition=[
            TextSegment(ANALYZE_PROMPTS[prompt_idx % len(ANALYZE_PROMPTS)]),
            ImageSegment(lq.image, "input"),
        ],
        response=[TextSegment(analysis_text(specs)), ImageSegment(hq.image, "target")],
        task="interleaved_restore",
        meta=dict(restore_sample.meta, partition="interleaved"),
    )


# ---------------------------------------------------------------------------
# partition synthesis


def _draw_spec(kind: str, rng: np.random.Generator, seed: int, ranges=None) -> DegradationSpec:
    ranges = ranges or TRAIN_PARAM_RANGES
    params = {
        name: float(rng.uniform(lo, hi)) for name, (lo, hi) in ranges[kind].items()
    }
    return DegradationSpec(kind=kind, params=params, seed=seed)


def _draw_single(rng, sample_seed_args, ranges=None, kinds=degrade.KINDS):
    kind = kinds[int(rng.integers(len(kinds)))]
    return [_draw_spec(kind, rng, derive_seed(*sample_seed_args, 0), ranges)]


def _draw_multi(rng, sample_seed_args, ranges=None, kinds=degrade.KINDS):
    n = int(rng.integers(2, 4))
    idx = rng.choice(len(kinds), size=n, replace=False)
    return [
        _draw_spec(kinds[int(k)], rng, derive_seed(*sample_seed_args, j), ranges)
        for j, k in enumerate(idx)
    ]


def _draw_high_order(rng, sample_seed_args, ranges=None, rounds: int = 2, factor: int = 1):
    # RealESRGAN-style rounds of blur -> noise -> jpeg, milder per stage
    stages = []
    j = 0
    for _ in range(rounds):
        for kind in ("blur", "noise", "jpeg"):
            spec = _draw_spec(kind, rng, derive_seed(*sample_seed_args, j), ranges)
            if kind == "blur":
                spec.params["sigma"] *= 0.6
            elif kind == "noise":
                spec.params["sigma"] *= 0.6
            else:
                spec.params["quality"] = float(
                    np.clip(spec.params["quality"] + 25.0, 1.0, 100.0)
                )
            stages.append(spec)
            j += 1
    return PipelineSpec(stages=stages, downsample_factor=factor)


def build_partitions(
    counts: dict[str, int],
    resolution: int = 32,
    seed: int = 0,
    ranges: dict | None = None,
    high_order_rounds: int = 2,
    high_order_factor: int = 1,
    degradation_kinds: Sequence[str] = degrade.KINDS,
    split: int = 0,
) -> dict[str, list[TrainingSample]]:
    """Generate all requested partitions from procedural textures, fully seeded.

    ``split`` separates train/val streams drawing from the same config.
    """
    kinds = tuple(degradation_kinds)
    parts: dict[str, list[TrainingSample]] = {}
    for name, count in counts.items():
        if name not in PARTITIONS:
            raise CorpusError(f"unknown partition {name!r}")
        if count <= 0:
            continue
        samples = []
        for i in range(count):
            seed_args = (seed, split, PARTITION_IDS[name], i)
            rng = np.random.default_rng(np.random.SeedSequence(list(seed_args)))
            hq = procedural_texture(
                resolution * (high_order_factor if name == "high_order" else 1),
                resolution * (high_order_factor if name == "high_order" else 1),
                rng,
            )
            if name == "single":
                samples.append(make_restore_sample(hq, _draw_single(rng, seed_args, ranges, kinds), name))
            elif name == "multi":
                samples.append(make_restore_sample(hq, _draw_multi(rng, seed_args, ranges, kinds), name))
            elif name == "high_order":
                pipe = _draw_high_order(rng, seed_args, ranges, high_order_rounds, high_order_factor)
                samples.append(make_restore_sample(hq, pipe, name))
            elif name == "interleaved":
                which = i % 3
                if which == 0:
                    specs = _draw_single(rng, seed_args, ranges, kinds)
                elif which == 1:
                    specs = _draw_multi(rng, seed_args, ranges, kinds)
                else:
                    specs = list(
                        _draw_high_order(rng, seed_args, ranges, high_order_rounds, 1).stages
                    )
                base = make_restore_sample(hq, specs, "interleaved")
                samples.append(
                    make_interleaved_sample(base, prompt_idx=int(rng.integers(len(ANALYZE_PROMPTS))))
                )
            else:  # iqa: cycle score / describe / compare
                which = i % 3
                prompt_idx = int(rng.integers(8))
                if which == 0:
                    n_specs = int(rng.integers(0, 3))  # includes pristine anchors
                    specs = []
                    for j in range(n_specs):
                        kind = kinds[int(rng.integers(len(kinds)))]
                        specs.append(_draw_spec(kind, rng, derive_seed(*seed_args, j), ranges))
                    samples.append(make_iqa_sample("score", hq=hq, specs=specs, prompt_idx=prompt_idx))
                elif which == 1:
                    specs = _draw_single(rng, seed_args, ranges, kinds)
                    if rng.random() < 0.5:
                        specs = _draw_multi(rng, seed_args, ranges, kinds)
                    samples.append(make_iqa_sample("describe", hq=hq, specs=specs, prompt_idx=prompt_idx))
                else:
                    spec_a = _draw_single(rng, (*seed_args, 100), ranges, kinds)
                    spec_b = _draw_single(rng, (*seed_args, 200), ranges, kinds)
                    a = quantize_8bit(degrade.compose(hq, spec_a))
                    b = quantize_8bit(degrade.compose(hq, spec_b))
                    samples.append(
                        make_iqa_sample(
                            "compare", reference=hq, candidate_a=a, candidate_b=b,
                            prompt_idx=prompt_idx,
                        )
                    )
        parts[name] = samples
    return parts


# ---------------------------------------------------------------------------
# mixing


def mix(
    partitions: dict[str, Sequence[TrainingSample]],
    ratios: dict[str, float],
    rng: np.random.Generator,
) -> Iterator[TrainingSample]:
    """Infinite i.i.d. categorical stream over partitions, uniform within each."""
    total = sum(ratios.values())
    if any(r < 0 for r in ratios.values()):
        raise CorpusError(f"negative mixing ratio in {ratios}")
    if abs(total - 1.0) > 1e-9:
        raise CorpusError(f"mixing ratios sum to {total}, expected 1")
    names = [n for n in PARTITIONS if ratios.get(n, 0.0) > 0.0]
    for name in names:
        if not partitions.get(name):
            raise CorpusError(f"nonzero ratio for empty partition {name!r}")
    probs = np.array([ratios[n] for n in names], dtype=np.float64)
    probs = probs / probs.sum()
    while True:
        k = int(rng.choice(len(names), p=probs))
        part = partitions[names[k]]
        yield part[int(rng.integers(len(part)))]


# ---------------------------------------------------------------------------
# manifest / dataset files


def _sample_record(sample: TrainingSample, lq_path, hq_path) -> dict:
    pipe = sample.meta.get("pipeline")
    if pipe is None and sample.meta.get("specs"):
        pipe = PipelineSpec(stages=list(sample.meta["specs"])).to_dict()
    return {
        "partition": sample.meta.get("partition"),
        "task": sample.task,
        "instruction": sample.instruction,
        "lq_path": lq_path,
        "hq_path": hq_path,
        "response_text": sample.response_text,
        "degradation_spec": pipe,
        "score": sample.meta.get("score"),
    }


def write_split(out_dir: Path, partitions: dict[str, list[TrainingSample]]) -> Path:
    """Write one dataset split: per-partition PNG pairs plus manifest.jsonl."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for name in PARTITIONS:
        samples = partitions.get(name, [])
        if not samples:
            continue
        pdir = out_dir / name
        pdir.mkdir(exist_ok=True)
        for i, sample in enumerate(samples):
            stem = f"{name}_{i:05d}"
            cond_imgs = [s for s in sample.condition if isinstance(s, ImageSegment)]
            resp_imgs = [s for s in sample.response if isinstance(s, ImageSegment)]
            if sample.task == "iqa_compare":
                ref_p, a_p, b_p = (
                    f"{name}/{stem}_ref.png",
                    f"{name}/{stem}_a.png",
                    f"{name}/{stem}_b.png",
                )
                save_png(cond_imgs[0].image, out_dir / ref_p)
                save_png(cond_imgs[1].image, out_dir / a_p)
                save_png(cond_imgs[2].image, out_dir / b_p)
                records.append(_sample_record(sample, [a_p, b_p], ref_p))
            else:
                lq_p = f"{name}/{stem}_lq.png"
                save_png(cond_imgs[0].image, out_dir / lq_p)
                hq_p = None
                if resp_imgs:
                    hq_p = f"{name}/{stem}_hq.png"
                    save_png(resp_imgs[0].image, out_dir / hq_p)
                records.append(_sample_record(sample, lq_p, hq_p))
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({k: rec[k] for k in MANIFEST_FIELDS}) + "\n")
    return manifest


def _sample_from_record(rec: dict, root: Path) -> TrainingSample:
    task = rec["task"]
    instruction = rec["instruction"]
    pipe = rec.get("degradation_spec")
    specs = [DegradationSpec.from_dict(s) for s in pipe["stages"]] if pipe else []
    meta = {
        "partition": rec["partition"],
        "specs": specs,
        "pipeline": pipe,
        "score": rec.get("score"),
    }
    if task == "iqa_compare":
        ref = load_png(root / rec["hq_path"])
        a = load_png(root / rec["lq_path"][0])
        b = load_png(root / rec["lq_path"][1])
        condition = [
            TextSegment(instruction),
            ImageSegment(ref, "input"),
            ImageSegment(a, "input"),
            ImageSegment(b, "input"),
        ]
        return TrainingSample(condition, [TextSegment(rec["response_text"])], task, meta)
    lq = load_png(root / rec["lq_path"])
    condition = [TextSegment(instruction), ImageSegment(lq, "input")]
    if task in ("iqa_score", "iqa_describe"):
        return TrainingSample(condition, [TextSegment(rec["response_text"])], task, meta)
    hq = load_png(root / rec["hq_path"])
    if task == "restore":
        return TrainingSample(condition, [ImageSegment(hq, "target")], task, meta)
    if task == "interleaved_restore":
        response = [TextSegment(rec["response_text"]), ImageSegment(hq, "target")]
        return TrainingSample(condition, response, task, meta)
    raise CorpusError(f"unknown task {task!r} in manifest")


def load_split(split_dir: Path) -> dict[str, list[TrainingSample]]:
    """Read a split directory back into in-memory partitions."""
    split_dir = Path(split_dir)
    manifest = split_dir / "manifest.jsonl"
    if not manifest.exists():
        raise CorpusError(f"no manifest at {manifest}")
    parts: dict[str, list[TrainingSample]] = {}
    with open(manifest, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            sample = _sample_from_record(rec, split_dir)
            parts.setdefault(rec["partition"], []).append(sample)
    return parts


def load_records(split_dir: Path) -> list[dict]:
    """Raw manifest records (for evaluation, which needs file paths)."""
    manifest = Path(split_dir) / "manifest.jsonl"
    if not manifest.exists():
        raise CorpusError(f"no manifest at {manifest}")
    with open(manifest, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh]
