"""Concrete UAV / digital-twin model over the kernel.

A physical twin (the UAV) carries M sensors, executes maneuver commands, and
takes structural damage; a digital twin receives sensor observations over
lossy-ordered channels, maintains a health estimate, and emits maneuver
commands back. Every channel hop is a bounded-window queue, so message
reordering and staleness are part of the state space.

Mission clock
    Sensor 1's observe-and-transmit step defines the epoch: it stamps t+1 and
    advances the clock. Other sensors stamp the epoch in progress (also t+1)
    without advancing, and may fall behind entire epochs. Each sensor emits at
    most once per epoch, so per-sensor timestamps are strictly increasing.

Channels
    eta plays two roles: a delivery may pull any of the first eta queued
    messages (out-of-order window), and a channel holds at most eta
    undelivered messages, blocking its sender while full. The second role is
    what keeps exhaustive exploration affordable; without it the queues
    dominate the state count without adding delivery behaviors, since
    positions past eta are undeliverable anyway until the queue drains.

Sensor noise
    A reading in flight is the exact health snapshot at sensing time. The
    +-noise measurement uncertainty is resolved where the reading is used,
    not in the channel: the digital update treats a reading within noise of
    zero as a possible critical-failure report, and its predictive drift is
    floored by noise (an estimate ingesting uncertain readings cannot be more
    certain than they are). Carrying every perturbed value through the queues
    instead multiplies the reachable set by roughly two orders of magnitude
    at the default parameters, with no effect on any checked property.

Variant knob
    fixed      - reference behavior
    buggy-p8   - command receipt skips the staleness check and accepts
                 unconditionally (everything else identical)
    broken-p3  - the digital update ignores possibly-critical sensor readings
                 and applies its normal predictive step instead of degrading

Processes, in declared order (physical twin first, then digital twin):
    pt_observe_emit_<m>      SF   sense, stamp, push to n_obs_m; m=1 ticks t
    pt_receive_control_<i>   SF for i=1, UF beyond   deliver from n_u
    pt_execute_control       SF   run the accepted command, or synthesize a
                                  backup when none is available
    dt_receive_obs_<m>_<i>   SF for i=1, UF beyond   deliver from n_obs_m
    dt_update_digital        WF   consume one consistent observation snapshot
    dt_compute_emit_control  WF   derive a command and push it to n_u
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

from .checker import ActionInvariant, LeadsTo, StateInvariant
from .kernel import Fairness, Model, ProcessDef, VarSpec, channel_push, channel_take


class ConfigError(ValueError):
    """A model configuration is malformed or out of range."""


VARIANTS = ("fixed", "buggy-p8", "broken-p3")

BACKUP = "Backup"
DYNAMIC = "Dynamic"


class Cmd(NamedTuple):
    """A maneuver command: epoch it was produced in, origin, maneuver type.

    Type 2 is the conservative maneuver, type 3 the aggressive one; aggressive
    maneuvers wear the airframe harder, which the digital update models with a
    wider drift bound.
    """

    t: int
    name: str
    type: int


class Obs(NamedTuple):
    """A sensor reading: epoch stamp, producing sensor, observed health."""

    t: int
    sensor: int
    value: int


# Messages recur across millions of states; interning them keeps the state
# tuples sharing one object per distinct message, which matters for both
# memory and tuple-comparison speed during deduplication.
_MSG_CACHE: dict[tuple, Cmd | Obs] = {}


def _cmd(t: int, name: str, type_: int) -> Cmd:
    key = (t, name, type_)
    hit = _MSG_CACHE.get(key)
    if hit is None:
        hit = _MSG_CACHE[key] = Cmd(t, name, type_)
    return hit


def _obs(t: int, sensor: int, value: int) -> Obs:
    key = (t, sensor, value)
    hit = _MSG_CACHE.get(key)
    if hit is None:
        hit = _MSG_CACHE[key] = Obs(t, sensor, value)
    return hit


@dataclass(frozen=True)
class UavConfig:
    """Model parameters. `sync_tol` defaults to the worst-case reachable
    divergence (t_max-1 predictive steps of +-zeta3, c_max executions of
    delta damage, one reading's noise), so the reference variant is in sync
    by construction; tighten it deliberately to make P2 bite."""

    m: int = 2            # sensor count
    eta: int = 2          # channel delivery window
    c_max: int = 3        # maneuver budget
    t_max: int = 4        # mission epochs
    s0: int = 100         # initial physical health
    d0: int = 100         # initial digital estimate
    delta: int = 1        # damage per maneuver (worst case)
    d_min: int = 50       # estimate threshold for offering aggressive maneuvers
    noise: int = 1        # sensor noise amplitude
    zeta2: int = 1        # drift bound after a conservative maneuver
    zeta3: int = 5        # drift bound after an aggressive maneuver
    variant: str = "fixed"
    sync_tol: int | None = None   # P2 tolerance; None -> worst-case default
    s0_spread: int = 1            # number of initial health values s0, s0-1, ...
    split_execute: bool = False   # split execution into commit + damage steps

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}")
        for name in ("m", "eta", "c_max", "t_max", "delta", "s0_spread"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("noise", "zeta2", "zeta3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("s0", "d0", "d_min"):
            if not 0 <= getattr(self, name) <= 100:
                raise ConfigError(f"{name} must be in 0..100")
        if self.s0 - (self.s0_spread - 1) < 0:
            raise ConfigError("s0_spread reaches below health 0")
        if self.sync_tol is not None and self.sync_tol < 0:
            raise ConfigError("sync_tol must be >= 0")

    @property
    def tolerance(self) -> int:
        """Worst honest disagreement between health and its estimate.

        The digital estimate can complete at most t_max - 1 update rounds,
        each drifting by at most the widest predictive step (the zeta for the
        maneuver in force, floored by the sensor uncertainty). Damage applied
        between the last consumed reading and termination adds c_max * delta,
        and the final reading itself was only accurate to within noise.
        """
        if self.sync_tol is not None:
            return self.sync_tol
        widest = max(self.zeta2, self.zeta3, self.noise)
        return (self.t_max - 1) * widest + self.c_max * self.delta + self.noise


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}
_INT_KEYS = ("M", "eta", "c_max", "t_max", "s0", "d0", "delta", "d_min",
             "noise", "zeta2", "zeta3", "sync_tol", "s0_spread")


def parse_config(text: str) -> UavConfig:
    """Parse `key = value` lines. `#` starts a comment; blank lines are
    skipped; unknown keys are rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} needs an integer, got {val!r}") from None
        elif key == "variant":
            values[key] = val
        elif key == "split_execute":
            if val.lower() not in _BOOL:
                raise ConfigError(f"line {lineno}: split_execute needs true/false, got {val!r}")
            values[key] = _BOOL[val.lower()]
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if "M" in values:
        values["m"] = values.pop("M")
    try:
        return UavConfig(**values)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> UavConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def config_items(cfg: UavConfig) -> list[tuple[str, object]]:
    """Effective configuration as sorted (key, value) pairs, file-key spelling."""
    out = []
    for f in fields(cfg):
        key = "M" if f.name == "m" else f.name
        value = getattr(cfg, f.name)
        if f.name == "sync_tol":
            value = cfg.tolerance
        out.append((key, value))
    return sorted(out)


# --- model construction -------------------------------------------------------

# Fixed slots, then (n_obs_m, obs_in_m) per sensor, then the split-execute
# pending slot if enabled.
_T, _S, _UX, _UC, _D, _DT, _DF, _U, _NU, _UIN, _FR = range(11)
_FIXED = 11


def build_model(cfg: UavConfig) -> Model:
    M, eta = cfg.m, cfg.eta
    t_max, c_max, delta = cfg.t_max, cfg.c_max, cfg.delta
    noise, zeta2, zeta3, d_min = cfg.noise, cfg.zeta2, cfg.zeta3, cfg.d_min
    buggy = cfg.variant == "buggy-p8"
    broken = cfg.variant == "broken-p3"
    split = cfg.split_execute

    def qi(m: int) -> int:
        return _FIXED + 2 * (m - 1)

    def ri(m: int) -> int:
        return _FIXED + 2 * (m - 1) + 1

    _PEND = _FIXED + 2 * M  # only present when split

    # -- variable declarations --

    def is_cmd(v) -> bool:
        return (isinstance(v, Cmd) and 0 <= v.t <= t_max
                and v.name in (BACKUP, DYNAMIC) and v.type in (2, 3))

    def obs_from(m: int):
        def is_obs(v) -> bool:
            return (isinstance(v, Obs) and 1 <= v.t <= t_max and v.sensor == m
                    and 0 <= v.value <= 100)
        return is_obs

    def opt(check):
        return lambda v: v is None or check(v)

    def obs_queue(m: int):
        is_obs = obs_from(m)

        def check(v) -> bool:
            if not isinstance(v, tuple) or len(v) > eta:
                return False
            return all(map(is_obs, v)) and all(a.t < b.t for a, b in zip(v, v[1:]))

        return check

    def cmd_queue(v) -> bool:
        if not isinstance(v, tuple) or len(v) > eta:
            return False
        return all(map(is_cmd, v)) and all(a.t < b.t for a, b in zip(v, v[1:]))

    def int_in(lo, hi):
        return lambda v: isinstance(v, int) and not isinstance(v, bool) and lo <= v <= hi

    is_bool = lambda v: isinstance(v, bool)

    variables = [
        VarSpec("t", int_in(0, t_max), f"mission epoch 0..{t_max}"),
        VarSpec("s", int_in(0, 100), "physical health 0..100"),
        VarSpec("u_executed", opt(is_cmd), "last executed command or none"),
        VarSpec("u_executed_count", int_in(0, c_max + 1), f"executions 0..{c_max + 1}"),
        VarSpec("d", int_in(0, 100), "digital health estimate 0..100"),
        VarSpec("d_obs_t", int_in(0, t_max), "newest consumed snapshot epoch"),
        VarSpec("d_updated", is_bool, "estimate refreshed since last command"),
        VarSpec("u", opt(is_cmd), "last computed command or none"),
        VarSpec("n_u", cmd_queue, f"command channel, timestamps ascending, at most {eta} in flight"),
        VarSpec("u_in", opt(is_cmd), "last accepted command or none"),
        VarSpec("u_in_fresh", is_bool, "accepted command not yet executed"),
    ]
    for m in range(1, M + 1):
        variables.append(VarSpec(f"n_obs_{m}", obs_queue(m),
                                 f"sensor {m} channel, timestamps ascending, at most {eta} in flight"))
        variables.append(VarSpec(f"obs_in_{m}", opt(obs_from(m)),
                                 f"newest accepted reading from sensor {m}"))
    if split:
        variables.append(VarSpec("damage_pending", is_bool, "execution committed, damage unresolved"))

    # -- processes --

    def make_observe_emit(m: int):
        q, r = qi(m), ri(m)
        ticks = m == 1

        def step(v):
            t = v[_T]
            if t >= t_max or v[_S] <= 0:
                return ()
            queue = v[q]
            if len(queue) >= eta:
                return ()  # channel at capacity; sensing blocks until a delivery
            # Newest stamp this sensor has produced. Ascending queue stamps
            # make the tail the queue's newest; the accepted slot can be newer
            # when delivery emptied the queue out of order.
            last = queue[-1].t if queue else 0
            if v[r] is not None and v[r].t > last:
                last = v[r].t
            if last > t:
                return ()  # already emitted for the epoch in progress
            nv = list(v)
            nv[q] = channel_push(queue, _obs(t + 1, m, v[_S]))
            if ticks:
                nv[_T] = t + 1
            return (tuple(nv),)

        return ProcessDef(f"pt_observe_emit_{m}", Fairness.SF, step)

    def make_receive_obs(m: int, i: int):
        q, r = qi(m), ri(m)

        def step(v):
            queue = v[q]
            if i > len(queue):
                return ()
            taken, rest = channel_take(queue, i, eta)
            nv = list(v)
            nv[q] = rest
            held = v[r]
            if held is None or taken.t > held.t:
                nv[r] = taken
            # else: stale, dropped; the channel shrinks either way
            return (tuple(nv),)

        fairness = Fairness.SF if i == 1 else Fairness.UF
        return ProcessDef(f"dt_receive_obs_{m}_{i}", fairness, step)

    rslots = tuple(ri(m) for m in range(1, M + 1))

    def step_update(v):
        first = v[rslots[0]]
        if first is None:
            return ()
        tau = first.t
        bad = first.value <= noise
        for slot in rslots[1:]:
            held = v[slot]
            if held is None or held.t != tau:
                return ()
            bad = bad or held.value <= noise
        if tau <= v[_DT]:
            return ()
        d = v[_D]
        if bad and not broken:
            # A reading within noise of zero may be a failure report; the
            # predictive step is invalid and the estimate may degrade
            # anywhere down to total failure.
            choices = range(0, d + 1)
        else:
            u = v[_U]
            z = zeta3 if (u is not None and u.type == 3) else zeta2
            if z < noise:
                z = noise  # the estimate inherits at least the sensor uncertainty
            lo = d - z if d - z > 0 else 0
            hi = d + z if d + z < 100 else 100
            choices = range(lo, hi + 1)
        out = []
        for d2 in choices:
            nv = list(v)
            nv[_D] = d2
            nv[_DT] = tau
            nv[_DF] = True
            out.append(tuple(nv))
        return out

    def step_compute(v):
        if not v[_DF] or len(v[_NU]) >= eta:
            return ()
        u = v[_U]
        t = v[_T]
        if u is not None and u.t >= t:
            return ()  # one command per epoch
        out = []
        types = (3, 2) if v[_D] >= d_min else (2,)
        for ty in types:
            cmd = _cmd(t, DYNAMIC, ty)
            nv = list(v)
            nv[_U] = cmd
            nv[_NU] = channel_push(v[_NU], cmd)
            nv[_DF] = False
            out.append(tuple(nv))
        return out

    def make_receive_control(i: int):
        def step(v):
            if v[_S] <= 0 or v[_UC] > c_max:
                return ()
            queue = v[_NU]
            if i > len(queue):
                return ()
            taken, rest = channel_take(queue, i, eta)
            nv = list(v)
            nv[_NU] = rest
            held = v[_UIN]
            if buggy or taken.t > (held.t if held is not None else -1):
                nv[_UIN] = taken
                nv[_FR] = True
            return (tuple(nv),)

        fairness = Fairness.SF if i == 1 else Fairness.UF
        return ProcessDef(f"pt_receive_control_{i}", fairness, step)

    def _choose(v):
        """The command this execution would run, or None if none is due."""
        if v[_FR]:
            return v[_UIN]
        if v[_NU]:
            return None  # a command is in flight; no backup yet
        ux = v[_UX]
        if v[_T] <= (ux.t if ux is not None else 0):
            return None  # already acted this epoch
        return _cmd(v[_T], BACKUP, 2)

    def step_execute(v):
        if v[_S] <= 0 or v[_UC] >= c_max:
            return ()
        chosen = _choose(v)
        if chosen is None:
            return ()
        s = v[_S]
        out = []
        for s2 in (s, s - delta if s - delta > 0 else 0):
            nv = list(v)
            nv[_S] = s2
            nv[_UX] = chosen
            nv[_UC] = v[_UC] + 1
            nv[_FR] = False
            if chosen.name == BACKUP:
                nv[_UIN] = chosen  # the backup becomes the last-seen command
            out.append(tuple(nv))
        return out

    # Split variant: commit the command first, resolve damage in a separate
    # interleavable step. Used to report interleaving sensitivity; no property
    # is asserted over it.
    def step_execute_commit(v):
        if v[_S] <= 0 or v[_UC] >= c_max or v[_PEND]:
            return ()
        chosen = _choose(v)
        if chosen is None:
            return ()
        nv = list(v)
        nv[_UX] = chosen
        nv[_UC] = v[_UC] + 1
        nv[_FR] = False
        nv[_PEND] = True
        if chosen.name == BACKUP:
            nv[_UIN] = chosen
        return (tuple(nv),)

    def step_execute_damage(v):
        if not v[_PEND]:
            return ()
        s = v[_S]
        out = []
        for s2 in (s, s - delta if s - delta > 0 else 0):
            nv = list(v)
            nv[_S] = s2
            nv[_PEND] = False
            out.append(tuple(nv))
        return out

    processes = [make_observe_emit(m) for m in range(1, M + 1)]
    processes += [make_receive_control(i) for i in range(1, eta + 1)]
    if split:
        processes.append(ProcessDef("pt_execute_control_commit", Fairness.SF, step_execute_commit))
        processes.append(ProcessDef("pt_execute_control_damage", Fairness.SF, step_execute_damage))
    else:
        processes.append(ProcessDef("pt_execute_control", Fairness.SF, step_execute))
    for m in range(1, M + 1):
        processes += [make_receive_obs(m, i) for i in range(1, eta + 1)]
    processes.append(ProcessDef("dt_update_digital", Fairness.WF, step_update))
    processes.append(ProcessDef("dt_compute_emit_control", Fairness.WF, step_compute))

    terminal = terminal_predicate(cfg)

    # -- initial states --

    base = [0, cfg.s0, None, 0, cfg.d0, 0, True, None, (), None, False]
    base += [(), None] * M
    if split:
        base.append(False)
    initial = []
    for k in range(cfg.s0_spread):
        vals = list(base)
        vals[_S] = cfg.s0 - k
        initial.append(tuple(vals))

    return Model(variables, initial, processes, terminal, name=f"uav-{cfg.variant}")


def terminal_failure(cfg: UavConfig):
    """Predicate over raw value tuples: the mission ended in recognized
    failure (estimate and every newest reading non-positive)."""
    M = cfg.m
    rslots = tuple(_FIXED + 2 * (m - 1) + 1 for m in range(1, M + 1))

    def failed(v) -> bool:
        if v[_D] > 0:
            return False
        for slot in rslots:
            held = v[slot]
            if held is None or held.value > 0:
                return False
        return True

    return failed


def terminal_predicate(cfg: UavConfig):
    """Predicate over raw value tuples: maneuvers exhausted, clock expired,
    or recognized failure."""
    c_max, t_max = cfg.c_max, cfg.t_max
    failed = terminal_failure(cfg)

    def terminal(v) -> bool:
        return v[_UC] >= c_max or v[_T] >= t_max or failed(v)

    return terminal


def property_catalog(cfg: UavConfig) -> list:
    """The named properties checked against a model built from `cfg`.

    P1   every run ends in a terminal state
    P2   at non-failure termination the twins agree within the tolerance
    P4   an update consumes a full same-stamp snapshot (one per sensor)
    P5   a queued observation is eventually delivered or discarded, one
         instance per (sensor, stamp); discharged if the run ends first
    P7   the newest dynamic command in flight is eventually executed or
         superseded by a newer execution, one instance per stamp; likewise
         discharged at termination
    P8   executed-command timestamps strictly increase; an edge that leaves
         the executed command untouched is unconstrained

    Termination discharge in P5/P7 keeps eventuality meaningful on a model
    whose every run ends: a message still in flight when the mission ends is
    not a delivery failure.
    """
    M, t_max = cfg.m, cfg.t_max
    tol = cfg.tolerance
    terminal = terminal_predicate(cfg)
    failed = terminal_failure(cfg)

    def p2(v) -> bool:
        if not terminal(v) or failed(v):
            return True
        return abs(v[_D] - v[_S]) <= tol

    def p4(a, b) -> bool:
        tau = b[_DT]
        if a[_DT] == tau:
            return True
        for m in range(1, M + 1):
            held = a[_FIXED + 2 * (m - 1) + 1]
            if held is None or held.t != tau:
                return False
        return True

    def p8(a, b) -> bool:
        ua, ub = a[_UX], b[_UX]
        if ua is None or ub == ua:
            return True
        return ub is not None and ub.t > ua.t

    props = [
        LeadsTo("P1", lambda v: True, terminal,
                "every run reaches a terminal state"),
        StateInvariant("P2", p2,
                       f"terminal sync: |d - s| <= {tol} unless the run failed"),
        ActionInvariant("P4", p4,
                        "updates consume one consistent snapshot from every sensor"),
    ]

    def p5_pair(m: int, tau: int):
        q = _FIXED + 2 * (m - 1)

        def present(v) -> bool:
            return any(o.t == tau for o in v[q])

        def gone(v) -> bool:
            return terminal(v) or not any(o.t == tau for o in v[q])

        return present, gone

    for m in range(1, M + 1):
        for tau in range(1, t_max + 1):
            present, gone = p5_pair(m, tau)
            props.append(LeadsTo(f"P5(m={m},t={tau})", present, gone,
                                 "queued observations are delivered or dropped"))

    def p7_pair(tau: int):
        def newest_in_flight(v) -> bool:
            u = v[_U]
            return (u is not None and u.t == tau
                    and any(c.t == tau for c in v[_NU]))

        def settled(v) -> bool:
            if terminal(v):
                return True
            ux = v[_UX]
            return ux is not None and ux.t >= tau

        return newest_in_flight, settled

    for tau in range(t_max):
        newest, settled = p7_pair(tau)
        props.append(LeadsTo(f"P7(t={tau})", newest, settled,
                             "the newest command in flight gets executed or superseded"))

    props.append(ActionInvariant("P8", p8,
                                 "executed-command timestamps strictly increase"))
    return props
