"""Parameter and multiply-accumulate accounting for the whole pipeline.

A complete tree of depth d stores ``2**d - 1`` splits (feature id and
threshold each) and ``2**d`` leaf values. Inference on one pixel costs one
operation per comparison along the root-to-leaf path plus one for the leaf
accumulation, i.e. ``d + 1`` per tree. All arithmetic is integer.
"""
import json
from dataclasses import dataclass, field


PAPER_BACKBONE = {"name": "EfficientNetB4", "params": 16_742_216, "macs": 13_503_446_880}


def tree_params(n_trees, depth):
    return n_trees * (3 * 2**depth - 2)


def stage_macs(map_h, map_w, n_trees, depth):
    return map_h * map_w * n_trees * (depth + 1)


@dataclass
class ComplexityRow:
    module: str
    sub_module: str
    trees: int | None
    depth: int | None
    map_size: tuple | None
    params: int
    macs: int


@dataclass
class ComplexityReport:
    rows: list = field(default_factory=list)

    @property
    def total_params(self):
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self):
        return sum(r.macs for r in self.rows)

    @staticmethod
    def _pct(part, total):
        return round(100.0 * part / total, 1) if total else 0.0

    def to_dict(self):
        tp, tm = self.total_params, self.total_macs
        return {
            "rows": [
                {
                    "module": r.module,
                    "sub_module": r.sub_module,
                    "trees": r.trees,
                    "depth": r.depth,
                    "map_size": list(r.map_size) if r.map_size else None,
                    "params": r.params,
                    "params_pct": self._pct(r.params, tp),
                    "macs": r.macs,
                    "macs_pct": self._pct(r.macs, tm),
                }
                for r in self.rows
            ],
            "total_params": tp,
            "total_macs": tm,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self):
        tp, tm = self.total_params, self.total_macs
        dash = "_"

        def fmt(n, total):
            return f"{n:,} ({self._pct(n, total):.1f}%)"

        params = [["Module", "Sub-Module", "# Trees", "Depth", "Parameters (%)"]]
        macs = [["Module", "Sub-Module", "Map size", "MACs (%)"]]
        for r in self.rows:
            params.append(
                [r.module, r.sub_module, dash if r.trees is None else str(r.trees),
                 dash if r.depth is None else str(r.depth), fmt(r.params, tp)]
            )
            size = dash if r.map_size is None else f"{r.map_size[0]}x{r.map_size[1]}"
            macs.append([r.module, r.sub_module, size, fmt(r.macs, tm)])
        params.append(["Total", dash, dash, dash, f"{tp:,}"])
        macs.append(["Total", dash, dash, f"{tm:,}"])
        return _grid(params) + "\n" + _grid(macs)


def _grid(cells):
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass
class PipelineShape:
    """Tree counts, depths and map sizes of every boosted classifier."""

    cascade_resolutions: tuple = (42, 42, 84, 168)
    cascade_trees: tuple = (200, 200, 200, 200)
    cascade_depths: tuple = (3, 3, 3, 3)
    refiner_size: int = 168
    refiner_trees: dict = field(default_factory=lambda: {"long": 150, "short": 150})
    refiner_depths: dict = field(default_factory=lambda: {"long": 6, "short": 6})

    @classmethod
    def paper_scale(cls):
        return cls(
            cascade_trees=(10000,) * 4,
            cascade_depths=(3,) * 4,
            refiner_trees={"long": 6000, "short": 6000},
            refiner_depths={"long": 6, "short": 6},
        )


def report(shape, backbone=None):
    """Rows for the backbone, the four cascade stages and both refiners.

    ``backbone`` is ``{"name", "params", "macs"}`` measured elsewhere; the
    backbone itself is not modelled here.
    """
    backbone = backbone or {"name": "backbone", "params": 0, "macs": 0}
    rows = [
        ComplexityRow("Stage-1", backbone.get("name", "backbone"), None, None, None,
                      int(backbone["params"]), int(backbone["macs"]))
    ]
    for k, (res, n, d) in enumerate(zip(shape.cascade_resolutions, shape.cascade_trees, shape.cascade_depths)):
        params = tree_params(n, d) if n else 0
        macs = stage_macs(res, res, n, d) if n else 0
        rows.append(ComplexityRow("Stage-1", f"XGBoost{k + 1}", n, d, (res, res), params, macs))
    for term in ("long", "short"):
        n, d, s = shape.refiner_trees[term], shape.refiner_depths[term], shape.refiner_size
        params = tree_params(n, d) if n else 0
        macs = stage_macs(s, s, n, d) if n else 0
        rows.append(ComplexityRow("Stage-2", f"XGBoost({term}-term)", n, d, (s, s), params, macs))
    return ComplexityReport(rows)


def paper_report():
    return report(PipelineShape.paper_scale(), PAPER_BACKBONE)
