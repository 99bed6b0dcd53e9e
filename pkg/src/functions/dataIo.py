"""
Stream, theory and configuration file input/output.

Fact files hold one ground ``happensAt/2`` or ``holdsAt/2`` fact per line,
``.``-terminated. A line ``% interpretation <id> [<t_start> <t_end>]`` opens
an explicit interpretation; without such headers the facts are cut into
windows of ``chunk_size`` time points. Other ``%`` lines are comments.
``holdsAt`` facts over a target fluent are annotation, everything else is
narrative.
"""

import logging
import re
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

from src.functions.clauseSpace import new_clause_id, parse_modes
from src.functions.termParser import TermSyntaxError, iter_statements, parse_clause, parse_fact
from src.models.Clause import BottomClause, Clause, ClauseKind
from src.models.HoeffdingParams import ConfigError
from src.models.Interpretation import Interpretation
from src.models.ModeDeclaration import ModeBias
from src.models.RunReport import RunReport
from src.models.StreamSpec import GeneratorConfig, StreamSpec
from src.models.Term import Atom, Constant, Literal
from src.models.Theory import Theory
from src.models.Topology import Topology

logger = logging.getLogger(__name__)

T = TypeVar("T")

HEADER_PATTERN = re.compile(r"^%\s*interpretation\s+(\S+)(?:\s+(-?\d+)\s+(-?\d+))?\s*$")
FACT_PREDICATES = ("happensAt", "holdsAt")


class StreamParseError(ValueError):
    """Raised for malformed stream or theory text; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"Line {line}: {message}")
        self.line = line


def _read(source: Union[str, Path]) -> str:
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read {source}: {e}") from e


# Streams


def _fact_time(atom: Atom, line: int) -> int:
    if atom.predicate not in FACT_PREDICATES or atom.arity != 2:
        raise StreamParseError(f"Expected happensAt/2 or holdsAt/2, got {atom}", line)
    last = atom.args[-1]
    if not isinstance(last, Constant) or not last.name.lstrip("-").isdigit():
        raise StreamParseError(f"Time stamp of {atom} is not an integer", line)
    return int(last.name)


def _is_annotation(atom: Atom, targets: Sequence[str]) -> bool:
    if atom.predicate != "holdsAt":
        return False
    fluent = atom.args[0]
    return isinstance(fluent, Atom) and fluent.predicate in targets


class _Section:
    def __init__(self, interp_id: str, bounds: Optional[Tuple[int, int]], line: int):
        self.interp_id = interp_id
        self.bounds = bounds
        self.line = line
        self.facts: List[Tuple[int, int, Atom]] = []


def parse_stream(
    text: str, spec: Optional[StreamSpec] = None, modes: Optional[ModeBias] = None
) -> List[Interpretation]:
    """
    Parse fact-file text into an ordered list of interpretations.

    Target fluents come from ``spec.targets`` or else from the head modes.

    Raises:
        StreamParseError: on a malformed fact or header, a fact outside its
            interpretation's window, or time stamps that go backward anywhere
            in the stream, across interpretation headers included
    """
    spec = spec or StreamSpec()
    targets = spec.targets or (modes.target_fluents if modes is not None else ())
    sections: List[_Section] = []
    loose: List[Tuple[int, int, Atom]] = []
    last_time: Optional[int] = None
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("%"):
            match = HEADER_PATTERN.match(line)
            if match:
                if loose:
                    raise StreamParseError("Facts before the first interpretation header", loose[0][0])
                bounds = None
                if match.group(2) is not None:
                    bounds = (int(match.group(2)), int(match.group(3)))
                    if bounds[1] < bounds[0]:
                        raise StreamParseError(f"Empty interpretation window {bounds}", line_number)
                    if last_time is not None and bounds[0] < last_time:
                        raise StreamParseError(
                            f"Interpretation {match.group(1)} starts at {bounds[0]} after time stamp {last_time}",
                            line_number,
                        )
                sections.append(_Section(match.group(1), bounds, line_number))
            continue
        try:
            atom = parse_fact(line)
        except TermSyntaxError as e:
            raise StreamParseError(str(e), line_number) from e
        time = _fact_time(atom, line_number)
        if last_time is not None and time < last_time:
            raise StreamParseError(f"Time stamp {time} after {last_time}", line_number)
        last_time = time
        (sections[-1].facts if sections else loose).append((line_number, time, atom))

    if sections:
        stream = [_section_interpretation(section, targets) for section in sections]
    else:
        stream = _chunk(loose, spec.chunk_size, targets)
    logger.debug(f"Parsed {len(stream)} interpretations")
    return stream


def _section_interpretation(section: _Section, targets: Sequence[str]) -> Interpretation:
    narrative = [(line, time, atom) for line, time, atom in section.facts if not _is_annotation(atom, targets)]
    annotation = [(line, time, atom) for line, time, atom in section.facts if _is_annotation(atom, targets)]
    if section.bounds is not None:
        t_start, t_end = section.bounds
    elif narrative:
        t_start, t_end = narrative[0][1], narrative[-1][1]
    elif annotation:
        t_start = t_end = annotation[0][1]
    else:
        raise StreamParseError(f"Interpretation {section.interp_id} has no facts and no window", section.line)
    for line, time, atom in narrative:
        if not t_start <= time <= t_end:
            raise StreamParseError(f"{atom} lies outside window [{t_start}, {t_end}]", line)
    for line, time, atom in annotation:
        if not t_start <= time <= t_end + 1:
            raise StreamParseError(f"{atom} lies outside window [{t_start}, {t_end + 1}]", line)
    return Interpretation(
        section.interp_id,
        t_start,
        t_end,
        frozenset(atom for _, _, atom in narrative),
        frozenset(atom for _, _, atom in annotation),
    )


def _chunk(facts: List[Tuple[int, int, Atom]], chunk_size: int, targets: Sequence[str]) -> List[Interpretation]:
    if not facts:
        return []
    narrative_times = [time for _, time, atom in facts if not _is_annotation(atom, targets)]
    first = facts[0][1]
    last = max(narrative_times) if narrative_times else facts[-1][1]
    windows = [(start, min(start + chunk_size - 1, last)) for start in range(first, last + 1, chunk_size)]
    narrative: Dict[int, set] = defaultdict(set)
    annotation: Dict[int, set] = defaultdict(set)
    for _, time, atom in facts:
        if _is_annotation(atom, targets):
            for index, (t_start, t_end) in enumerate(windows):
                if t_start <= time <= t_end + 1:
                    annotation[index].add(atom)
        else:
            narrative[(time - first) // chunk_size].add(atom)
    return [
        Interpretation(
            f"w{index + 1}",
            t_start,
            t_end,
            frozenset(narrative[index]),
            frozenset(annotation[index]),
        )
        for index, (t_start, t_end) in enumerate(windows)
    ]


def load_stream(
    path: Union[str, Path], spec: Optional[StreamSpec] = None, modes: Optional[ModeBias] = None
) -> List[Interpretation]:
    stream = parse_stream(_read(path), spec, modes)
    logger.info(f"Loaded {len(stream)} interpretations from {path}")
    return stream


def render_stream(stream: Iterable[Interpretation]) -> str:
    """Fact-file text with explicit interpretation headers; parses back to ``stream``."""
    lines = []
    for interp in stream:
        lines.append(f"% interpretation {interp.interp_id} {interp.t_start} {interp.t_end}")
        atoms = sorted(interp.narrative | interp.annotation, key=lambda atom: (int(str(atom.args[-1])), str(atom)))
        lines.extend(f"{atom}." for atom in atoms)
    return "\n".join(lines) + ("\n" if lines else "")


def partition(stream: Sequence[T], k: int) -> List[List[T]]:
    """
    Deal interpretations to ``k`` sub-streams, positives and negatives each
    round-robin, keeping stream order inside every sub-stream.
    """
    if k < 1:
        raise ConfigError(f"Node count must be >= 1, got {k}")
    assigned: List[List[Tuple[int, T]]] = [[] for _ in range(k)]
    dealt = {True: 0, False: 0}
    for index, interp in enumerate(stream):
        positive = bool(getattr(interp, "has_positive", False))
        assigned[dealt[positive] % k].append((index, interp))
        dealt[positive] += 1
    return [[interp for _, interp in sorted(part, key=lambda pair: pair[0])] for part in assigned]


# Theories


def parse_theory(text: str) -> Theory:
    """
    Parse ``head :- l1, ..., ln.`` clauses (``head.`` for an empty body).

    Heads must be initiatedAt/2 or terminatedAt/2. Clause ids are derived
    from the clause's position in the text.
    """
    theory = Theory()
    try:
        statements = list(iter_statements(text))
    except TermSyntaxError as e:
        raise StreamParseError(str(e), len(text.splitlines())) from e
    for index, (line, statement) in enumerate(statements, start=1):
        try:
            head, body = parse_clause(statement)
            ClauseKind.of_head(head)
        except ValueError as e:
            raise StreamParseError(str(e), line) from e
        literals = tuple(Literal(atom) for atom in body)
        theory.add(
            Clause(
                clause_id=new_clause_id("theory", index),
                head=head,
                body=literals,
                bottom=BottomClause(head, literals),
            )
        )
    return theory


def load_theory(path: Union[str, Path]) -> Theory:
    return parse_theory(_read(path))


def write_text(path: Union[str, Path], text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot write {path}: {e}") from e


# Configuration files


def load_modes(path: Union[str, Path]) -> ModeBias:
    return parse_modes(_read(path))


def parse_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """``key = value`` lines; ``#`` and ``%`` start comment lines."""
    values: Dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        key, separator, value = line.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"{source}, line {line_number}: expected 'key = value', got {line!r}")
        values[key.strip()] = value.strip()
    return values


def _list_value(raw: str) -> Tuple[str, ...]:
    inner = raw.strip()
    if inner.startswith("[") and inner.endswith("]"):
        inner = inner[1:-1]
    return tuple(item.strip() for item in inner.split(",") if item.strip())


def _typed(key: str, raw: str, parse):
    try:
        return parse(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid value for {key}: {raw!r}") from e


GENERATOR_KEYS = ("entities", "horizon", "noise_rate", "seed", "chunk_size", "theory", "events", "arena")


def load_generator_config(path: Union[str, Path]) -> GeneratorConfig:
    """
    Read a generator config; ``theory`` is resolved relative to the config file.

    Raises:
        ConfigError: on unknown keys, bad values or a missing theory
    """
    values = parse_key_values(_read(path), str(path))
    unknown = sorted(set(values) - set(GENERATOR_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown generator keys {unknown}")
    if "theory" not in values:
        raise ConfigError(f"{path}: 'theory' (ground-truth theory file) is required")
    theory_path = Path(path).parent / values["theory"]
    try:
        ground_truth = load_theory(theory_path)
    except StreamParseError as e:
        raise ConfigError(f"{theory_path}: {e}") from e
    options = {}
    if "entities" in values:
        options["entities"] = _list_value(values["entities"])
    if "events" in values:
        options["events"] = _list_value(values["events"])
    for key, parse in (("horizon", int), ("seed", int), ("chunk_size", int), ("noise_rate", float), ("arena", float)):
        if key in values:
            options[key] = _typed(key, values[key], parse)
    return GeneratorConfig(ground_truth=ground_truth, theory_path=str(theory_path), **options)


def load_topology(path: Union[str, Path]) -> Topology:
    values = parse_key_values(_read(path), str(path))
    if "nodes" not in values or "mediator" not in values:
        raise ConfigError(f"{path}: topology needs 'nodes' and 'mediator'")
    return Topology(_list_value(values["nodes"]), values["mediator"])


def write_report(report: RunReport, path: Union[str, Path]) -> None:
    lines = [f"{key} = {value}" for key, value in report.to_key_values().items()]
    write_text(path, "\n".join(lines) + "\n")
    logger.info(f"Report written to {path}")
