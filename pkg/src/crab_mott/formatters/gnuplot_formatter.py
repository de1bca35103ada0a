"""Gnuplot script stubs that plot the tables of a run directory."""

from ..models import RunRecord
from .base import BaseFormatter


class GnuplotFormatter(BaseFormatter):
    """Render one gnuplot script from a template.

    Templates use ``{hash}`` and ``{experiment}`` placeholders. The data
    file is checked by ``applies_to`` so no script points at a missing table.
    """

    def __init__(self, filename: str, data_file: str, template: str, needs=None):
        self.filename = filename
        self.data_file = data_file
        self.template = template
        self.needs = needs

    def applies_to(self, record: RunRecord) -> bool:
        return self.needs(record) if self.needs else True

    def format(self, record: RunRecord) -> str:
        return self.template.format(
            hash=record.config_hash,
            experiment=record.experiment.value,
            data=self.data_file,
        )


_PREAMBLE = """# config_hash: {hash}
# experiment: {experiment}
set datafile separator "\\t"
set datafile commentschars "#"
set key autotitle columnhead
"""

PULSE_TEMPLATE = _PREAMBLE + """set terminal pngcairo size 800,500
set output "pulse.png"
set xlabel "t [hbar/U]"
set ylabel "V_0 [E_r]"
set y2label "J/U"
set y2tics
plot "{data}" using 1:5 with lines dashtype 2 lc rgb "gray40" title "guess", \\
     "{data}" using 1:3 with lines lw 2 lc rgb "navy" title "optimized", \\
     "{data}" using 1:2 axes x1y2 with lines lc rgb "dark-red" title "J/U"
"""

PROFILE_TEMPLATE = _PREAMBLE + """set terminal pngcairo size 600,400
set output "profile.png"
set xlabel "site i"
set ylabel "<n_i>, <dn_i^2>"
set yrange [0:*]
plot "{data}" using 1:2 with linespoints pt 7 title "<n_i>", \\
     "{data}" using 1:3 with linespoints pt 5 title "<dn_i^2>"
"""

TRACE_TEMPLATE = _PREAMBLE + """set terminal pngcairo size 700,450
set output "trace.png"
set logscale y
set xlabel "evaluation"
set ylabel "objective"
plot "{data}" using 1:5 with points pt 1 lc rgb "gray60" title "Delta E/N", \\
     "{data}" using 1:6 with steps lw 2 lc rgb "navy" title "best so far"
"""

ROBUSTNESS_TEMPLATE = _PREAMBLE + """set terminal pngcairo size 600,400
set output "robustness.png"
set logscale y
set xlabel "Delta N"
set ylabel "rho"
plot "{data}" using 1:4 with linespoints pt 7 lw 2 title "rho"
"""


def gnuplot_formatters() -> list[GnuplotFormatter]:
    """Script stubs for the tables a run can produce."""
    return [
        GnuplotFormatter(
            "pulse.gp", "best_pulse.tsv", PULSE_TEMPLATE, lambda r: r.best_pulse is not None
        ),
        GnuplotFormatter(
            "profile.gp", "profile.tsv", PROFILE_TEMPLATE, lambda r: r.final_profile is not None
        ),
        GnuplotFormatter(
            "trace.gp", "trace.tsv", TRACE_TEMPLATE, lambda r: bool(r.evaluation_trace)
        ),
        GnuplotFormatter(
            "robustness.gp",
            "robustness.tsv",
            ROBUSTNESS_TEMPLATE,
            lambda r: bool(r.tables.get("robustness")),
        ),
    ]
