# SPDX-License-Identifier: Apache-2.0
#
# Subject-runtime helper for the reval harness. Reads one JSON request on
# stdin, writes one JSON response on the original stdout. Modes:
#   parse     -- syntax check
#   analyze   -- statement tree of every function body
#   tests     -- assertion extraction and input derivation
#   trace     -- statement-level execution trace of one invocation
#   grade     -- run one assertion against a program
#   snapshot  -- canonicalize the bindings of a dict expression

import ast
import collections
import json
import math
import os
import signal
import sys
import time
import types

PROGRAM_FILE = "<reval-program>"
MAX_REPR = 20000
MAX_DEPTH = 32


# --------------------------------------------------------------------------
# Statement structure


def _kind(node):
    if isinstance(node, (ast.Assign, ast.AnnAssign)):
        return "assign"
    if isinstance(node, ast.AugAssign):
        return "aug_assign"
    if isinstance(node, ast.Return):
        return "return_stmt"
    if isinstance(node, ast.If) or type(node).__name__ == "Match":
        return "branch_head"
    if isinstance(node, (ast.For, ast.AsyncFor, ast.While)):
        return "loop_head"
    if isinstance(node, ast.Expr):
        value = node.value.value if isinstance(node.value, ast.Await) else node.value
        if isinstance(value, ast.Call):
            return "call_stmt"
    return "other"


def _is_docstring(node, index):
    return (index == 0 and isinstance(node, ast.Expr)
            and isinstance(node.value, ast.Constant)
            and isinstance(node.value.value, str))


def _has_code(node):
    if isinstance(node, ast.AnnAssign) and node.value is None:
        return False
    if isinstance(node, (ast.Global, ast.Nonlocal)):
        return False
    return True


def _target_names(target):
    """LHS variable names: identifiers, subscript bases, self attributes."""
    if isinstance(target, (ast.Tuple, ast.List)):
        out = []
        for elt in target.elts:
            out.extend(_target_names(elt))
        return out
    if isinstance(target, ast.Starred):
        return _target_names(target.value)
    if isinstance(target, ast.Name):
        return [target.id]
    if isinstance(target, ast.Attribute):
        if isinstance(target.value, ast.Name) and target.value.id == "self":
            return ["self." + target.attr]
        return _target_names(target.value)
    if isinstance(target, ast.Subscript):
        return _target_names(target.value)
    return []


def _is_trivial_init(value):
    if isinstance(value, ast.Constant):
        v = value.value
        if isinstance(v, bool):
            return False
        if isinstance(v, (int, float, complex)) and v == 0:
            return True
        if isinstance(v, (str, bytes)) and len(v) == 0:
            return True
        return False
    if isinstance(value, (ast.List, ast.Tuple, ast.Set)) and not value.elts:
        return True
    if isinstance(value, ast.Dict) and not value.keys:
        return True
    return False


def _is_constant_expr(value):
    try:
        ast.literal_eval(value)
        return True
    except Exception:
        return False


def _expr_names(expr):
    found = []
    for sub in ast.walk(expr):
        if isinstance(sub, ast.Attribute) and isinstance(sub.value, ast.Name) \
                and sub.value.id == "self":
            found.append((sub.lineno, sub.col_offset, "self." + sub.attr))
        elif isinstance(sub, ast.Name) and isinstance(sub.ctx, ast.Load) \
                and sub.id != "self":
            found.append((sub.lineno, sub.col_offset, sub.id))
    found.sort()
    out = []
    for _, _, name in found:
        if name not in out:
            out.append(name)
    return out


class _Collector:
    def __init__(self, source):
        self.source = source
        self.lines = source.splitlines()
        self.owner = {}
        self.functions = []

    def header_end(self, node):
        first_child = None
        for field in ("body",):
            seq = getattr(node, field, None)
            if seq:
                first_child = seq[0]
        if first_child is None:
            if type(node).__name__ == "Match" and node.cases:
                first_child = node.cases[0].pattern
            else:
                return node.end_lineno or node.lineno
        return max(node.lineno, first_child.lineno - 1)

    def text_of(self, node, compound):
        if compound:
            return self.lines[node.lineno - 1].strip()
        segment = ast.get_source_segment(self.source, node)
        if segment is None:
            return self.lines[node.lineno - 1].strip()
        return segment.strip()

    def stmt_list(self, body, function_id):
        out = []
        for i, node in enumerate(body):
            if _is_docstring(node, i) or not _has_code(node):
                continue
            out.append(self.stmt(node, function_id))
        return out

    def stmt(self, node, function_id):
        compound = isinstance(node, (ast.If, ast.For, ast.AsyncFor, ast.While,
                                     ast.Try, ast.With, ast.AsyncWith,
                                     ast.FunctionDef, ast.AsyncFunctionDef,
                                     ast.ClassDef)) or type(node).__name__ == "Match"
        end = self.header_end(node) if compound else (node.end_lineno or node.lineno)
        folded = node.lineno in self.owner
        if not folded:
            for ln in range(node.lineno, end + 1):
                self.owner.setdefault(ln, node.lineno)
        entry = {
            "line": node.lineno,
            "end_line": end,
            "node_type": type(node).__name__,
            "kind": _kind(node),
            "text": self.text_of(node, compound),
            "folded": folded,
            "function_id": function_id,
            "targets": [],
            "trivial_init": False,
            "constant_rhs": False,
            "return_names": [],
        }
        if isinstance(node, ast.Assign):
            for t in node.targets:
                entry["targets"].extend(_target_names(t))
            entry["trivial_init"] = _is_trivial_init(node.value)
            entry["constant_rhs"] = _is_constant_expr(node.value)
        elif isinstance(node, ast.AnnAssign):
            entry["targets"] = _target_names(node.target)
            entry["trivial_init"] = _is_trivial_init(node.value)
            entry["constant_rhs"] = _is_constant_expr(node.value)
        elif isinstance(node, ast.AugAssign):
            entry["targets"] = _target_names(node.target)
        elif isinstance(node, (ast.For, ast.AsyncFor)):
            entry["targets"] = _target_names(node.target)
        elif isinstance(node, ast.Return) and node.value is not None:
            entry["return_names"] = _expr_names(node.value)

        if isinstance(node, (ast.If, ast.For, ast.AsyncFor, ast.While)):
            entry["body"] = self.stmt_list(node.body, function_id)
            entry["orelse"] = self.stmt_list(node.orelse, function_id)
        elif isinstance(node, ast.Try) or type(node).__name__ == "TryStar":
            entry["body"] = self.stmt_list(node.body, function_id)
            entry["handlers"] = [self.stmt_list(h.body, function_id) for h in node.handlers]
            entry["orelse"] = self.stmt_list(node.orelse, function_id)
            entry["finalbody"] = self.stmt_list(node.finalbody, function_id)
        elif isinstance(node, (ast.With, ast.AsyncWith)):
            entry["body"] = self.stmt_list(node.body, function_id)
        elif type(node).__name__ == "Match":
            entry["cases"] = [self.stmt_list(c.body, function_id) for c in node.cases]
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            entry["defines"] = self.function(node)
        elif isinstance(node, ast.ClassDef):
            self.class_body(node)
        return entry

    def function(self, node):
        fid = len(self.functions)
        record = {"function_id": fid, "name": node.name, "def_line": node.lineno, "body": []}
        self.functions.append(record)
        record["body"] = self.stmt_list(node.body, fid)
        return fid

    def class_body(self, node):
        for child in node.body:
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self.function(child)
            elif isinstance(child, ast.ClassDef):
                self.class_body(child)

    def module(self, tree):
        for child in tree.body:
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self.function(child)
            elif isinstance(child, ast.ClassDef):
                self.class_body(child)


def analyze_source(source):
    tree = ast.parse(source, PROGRAM_FILE)
    collector = _Collector(source)
    collector.module(tree)
    return collector.functions, collector.owner


# --------------------------------------------------------------------------
# Value canonicalization


class _Opaque(Exception):
    pass


def _render(value, depth, active):
    if depth > MAX_DEPTH:
        raise _Opaque()
    t = type(value)
    if value is None or t is bool or t is int or t is str or t is bytes or t is complex:
        return repr(value)
    if t is float:
        if math.isnan(value):
            return "float('nan')"
        if math.isinf(value):
            return "float('inf')" if value > 0 else "float('-inf')"
        return repr(value)
    if t is range:
        return repr(value)
    if id(value) in active:
        raise _Opaque()
    active.add(id(value))
    try:
        if t is list:
            return "[" + ", ".join(_render(v, depth + 1, active) for v in value) + "]"
        if t is tuple:
            items = [_render(v, depth + 1, active) for v in value]
            if len(items) == 1:
                return "(" + items[0] + ",)"
            return "(" + ", ".join(items) + ")"
        if t is dict:
            return _render_dict(value, depth, active)
        if t is set or t is frozenset:
            items = sorted(_render(v, depth + 1, active) for v in value)
            if t is set:
                return "{" + ", ".join(items) + "}" if items else "set()"
            return "frozenset({" + ", ".join(items) + "})" if items else "frozenset()"
        if t is collections.deque:
            return "deque([" + ", ".join(_render(v, depth + 1, active) for v in value) + "])"
        if t is collections.OrderedDict:
            pairs = ["(" + _render(k, depth + 1, active) + ", " + _render(v, depth + 1, active) + ")"
                     for k, v in value.items()]
            return "OrderedDict([" + ", ".join(pairs) + "])"
        if t is collections.Counter:
            return "Counter(" + _render_dict(value, depth, active) + ")"
        if t is collections.defaultdict:
            factory = value.default_factory
            name = getattr(factory, "__name__", None) if factory is not None else "None"
            if name is None:
                raise _Opaque()
            return "defaultdict(" + name + ", " + _render_dict(value, depth, active) + ")"
        if isinstance(value, (types.ModuleType, types.FunctionType, types.BuiltinFunctionType,
                              types.MethodType, type, types.GeneratorType, types.CodeType)):
            raise _Opaque()
        fields = getattr(value, "__dict__", None)
        if isinstance(fields, dict) and type(t).__name__ == "type" and t.__module__ == "__reval__":
            parts = [k + "=" + _render(v, depth + 1, active) for k, v in sorted(fields.items())]
            return t.__name__ + "(" + ", ".join(parts) + ")"
        raise _Opaque()
    finally:
        active.discard(id(value))


def _render_dict(value, depth, active):
    pairs = sorted((_render(k, depth + 1, active), _render(v, depth + 1, active))
                   for k, v in value.items())
    return "{" + ", ".join(k + ": " + v for k, v in pairs) + "}"


def canonical(value):
    type_name = type(value).__name__
    try:
        text = _render(value, 0, set())
    except _Opaque:
        return {"value_repr": "<opaque>", "type_name": type_name, "representable": False}
    except Exception:
        return {"value_repr": "<opaque>", "type_name": type_name, "representable": False}
    if len(text) > MAX_REPR:
        return {"value_repr": "<opaque>", "type_name": type_name, "representable": False}
    return {"value_repr": text, "type_name": type_name, "representable": True}


_SKIPPED_TYPES = (types.ModuleType, types.FunctionType, types.BuiltinFunctionType, type,
                  types.MethodType)


def snapshot_bindings(bindings, self_attrs_of=None, exclude=()):
    state = {}
    for name in sorted(bindings):
        if name.startswith("__") or name in exclude or name == "self":
            continue
        value = bindings[name]
        if isinstance(value, _SKIPPED_TYPES):
            continue
        state[name] = canonical(value)
    if self_attrs_of is not None:
        fields = getattr(self_attrs_of, "__dict__", None)
        if isinstance(fields, dict):
            for attr in sorted(fields):
                if attr.startswith("__"):
                    continue
                value = fields[attr]
                if isinstance(value, _SKIPPED_TYPES):
                    continue
                state["self." + attr] = canonical(value)
    return state


# --------------------------------------------------------------------------
# Tracing


class _Limit(BaseException):
    pass


class _Tracer:
    def __init__(self, line_map, max_steps, deadline):
        self.line_map = line_map
        self.max_steps = max_steps
        self.deadline = deadline
        self.steps = []
        self.frame_ids = {}
        self.pending = {}
        self.stmt_count = 0
        self.limited = False

    def snapshot(self, frame):
        code = frame.f_code
        self_obj = None
        if code.co_argcount > 0 and code.co_varnames[0] == "self":
            self_obj = frame.f_locals.get("self")
        return snapshot_bindings(frame.f_locals, self_obj, set(code.co_freevars))

    def _abort(self):
        self.limited = True
        sys.settrace(None)
        raise _Limit()

    def global_hook(self, frame, event, arg):
        if event != "call":
            return None
        code = frame.f_code
        if code.co_filename != PROGRAM_FILE or code.co_name.startswith("<"):
            return None
        if frame not in self.frame_ids:
            self.frame_ids[frame] = len(self.frame_ids)
        self.steps.append({
            "step_index": len(self.steps),
            "frame_id": self.frame_ids[frame],
            "line_no": frame.f_lineno,
            "event": "call",
            "state_after": self.snapshot(frame),
        })
        return self.local_hook

    def _finish_pending(self, frame):
        step = self.pending.pop(frame, None)
        if step is not None:
            step["state_after"] = self.snapshot(frame)
        return step

    def local_hook(self, frame, event, arg):
        if time.monotonic() > self.deadline:
            self._abort()
        if event == "line":
            stmt_line = self.line_map.get(frame.f_lineno)
            if stmt_line is None:
                return self.local_hook
            current = self.pending.get(frame)
            if current is not None and current["line_no"] == stmt_line:
                return self.local_hook
            self._finish_pending(frame)
            self.stmt_count += 1
            if self.stmt_count > self.max_steps:
                self._abort()
            step = {
                "step_index": len(self.steps),
                "frame_id": self.frame_ids[frame],
                "line_no": stmt_line,
                "event": "stmt",
                "state_after": {},
            }
            self.steps.append(step)
            self.pending[frame] = step
        elif event == "return":
            last = self._finish_pending(frame)
            line = last["line_no"] if last is not None else self.line_map.get(frame.f_lineno, frame.f_lineno)
            self.steps.append({
                "step_index": len(self.steps),
                "frame_id": self.frame_ids[frame],
                "line_no": line,
                "event": "return_event",
                "state_after": self.snapshot(frame),
            })
        return self.local_hook


def _alarm(signum, frame):
    raise _Limit()


def _fresh_globals():
    return {"__name__": "__reval__", "__builtins__": __builtins__}


def do_trace(req):
    program = req["program"]
    _, owner = analyze_source(program)
    wall = float(req.get("wall_seconds", 10.0))
    signal.signal(signal.SIGALRM, _alarm)
    signal.setitimer(signal.ITIMER_REAL, wall + 0.5)
    globals_ = _fresh_globals()
    exec(compile(program, PROGRAM_FILE, "exec"), globals_)
    invocation = compile(req["invocation"], "<reval-invocation>", "eval")
    tracer = _Tracer(owner, int(req.get("max_steps", 100000)), time.monotonic() + wall)
    terminated = "ok"
    output = None
    error = ""
    try:
        sys.settrace(tracer.global_hook)
        try:
            result = eval(invocation, globals_)
        finally:
            sys.settrace(None)
            signal.setitimer(signal.ITIMER_REAL, 0)
        output = canonical(result)
    except _Limit:
        terminated = "timeout"
        error = "step or wall-clock limit exceeded"
    except BaseException as exc:  # noqa: BLE001 - subject code may raise anything
        terminated = "exception"
        error = type(exc).__name__ + ": " + str(exc)
    if tracer.limited:
        terminated = "timeout"
        output = None
    return {"ok": True, "steps": tracer.steps, "terminated": terminated,
            "output_value": output, "error": error}


def do_grade(req):
    wall = float(req.get("wall_seconds", 10.0))
    signal.signal(signal.SIGALRM, _alarm)
    signal.setitimer(signal.ITIMER_REAL, wall)
    try:
        globals_ = _fresh_globals()
        exec(compile(req["program"], PROGRAM_FILE, "exec"), globals_)
        prelude = req.get("prelude", "")
        if prelude:
            exec(compile(prelude, "<reval-prelude>", "exec"), globals_)
        exec(compile(req["assertion"], "<reval-assertion>", "exec"), globals_)
        outcome, detail = "pass", ""
    except AssertionError as exc:
        outcome, detail = "fail", str(exc)
    except _Limit:
        outcome, detail = "error", "timeout"
    except BaseException as exc:  # noqa: BLE001
        outcome, detail = "error", type(exc).__name__ + ": " + str(exc)
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
    return {"ok": True, "outcome": outcome, "detail": detail}


# --------------------------------------------------------------------------
# Assertions and inputs


def _entry_call(expr, entry_point):
    """First call in expr that invokes the entry point."""
    calls = [n for n in ast.walk(expr) if isinstance(n, ast.Call)]
    calls.sort(key=lambda n: (n.lineno, n.col_offset))
    if "." in entry_point:
        cls, method = entry_point.rsplit(".", 1)
        for call in calls:
            f = call.func
            if isinstance(f, ast.Attribute) and f.attr == method:
                return call
        return None
    for call in calls:
        f = call.func
        if isinstance(f, ast.Name) and f.id in ("candidate", entry_point):
            return call
    return None


def _assertion_info(text, entry_point):
    info = {"text": text, "rhs": None, "rhs_begin": -1, "rhs_end": -1,
            "invocation": None, "arguments": [], "ok": False}
    try:
        tree = ast.parse(text)
    except SyntaxError:
        return info
    if len(tree.body) != 1 or not isinstance(tree.body[0], ast.Assert):
        return info
    info["ok"] = True
    test = tree.body[0].test
    lhs = test
    if isinstance(test, ast.Compare) and len(test.ops) == 1 \
            and isinstance(test.ops[0], (ast.Eq, ast.Is)):
        rhs = test.comparators[0]
        if not isinstance(rhs, ast.Name) and _is_constant_expr(rhs) and rhs.lineno == rhs.end_lineno:
            raw = text.encode()
            starts = [0]
            for piece in text.splitlines(True):
                starts.append(starts[-1] + len(piece.encode()))
            begin = starts[rhs.lineno - 1] + rhs.col_offset
            end = starts[rhs.end_lineno - 1] + rhs.end_col_offset
            info["rhs"] = raw[begin:end].decode()
            info["rhs_begin"] = begin
            info["rhs_end"] = end
        lhs = test.left
    call = _entry_call(lhs, entry_point)
    if call is not None:
        if "." in entry_point:
            info["invocation"] = ast.get_source_segment(text, call)
        else:
            args = [ast.get_source_segment(text, a) for a in call.args]
            args += [ast.get_source_segment(text, k) for k in call.keywords]
            info["invocation"] = entry_point + "(" + ", ".join(args) + ")"
        info["arguments"] = [ast.get_source_segment(text, a) for a in call.args]
    return info


def _tests_item(item):
    entry_point = item["entry_point"]
    texts = list(item.get("assertions", []))
    test_source = item.get("test_source")
    result = {"assertions": [], "parse_error": None, "test_error": None}
    if test_source:
        try:
            tree = ast.parse(test_source)
        except SyntaxError as exc:
            result["test_error"] = "line %s: %s" % (exc.lineno, exc.msg)
            tree = None
        if tree is not None:
            for node in ast.walk(tree):
                if isinstance(node, ast.FunctionDef) and node.name == "check":
                    for stmt in node.body:
                        if isinstance(stmt, ast.Assert):
                            texts.append(ast.get_source_segment(test_source, stmt))
                    break
    result["assertions"] = [_assertion_info(t, entry_point) for t in texts]
    if "program" in item:
        try:
            ast.parse(item["program"], PROGRAM_FILE)
        except SyntaxError as exc:
            result["parse_error"] = "line %s: %s" % (exc.lineno, exc.msg)
    return result


def do_tests(req):
    return {"ok": True, "items": [_tests_item(item) for item in req["items"]]}


def do_snapshot(req):
    globals_ = _fresh_globals()
    if req.get("program"):
        exec(compile(req["program"], PROGRAM_FILE, "exec"), globals_)
    bindings = eval(compile(req["bindings"], "<reval-bindings>", "eval"), globals_)
    return {"ok": True, "state": snapshot_bindings(bindings)}


def do_parse(req):
    try:
        ast.parse(req["source"], PROGRAM_FILE)
    except SyntaxError as exc:
        return {"ok": False, "error": "line %s: %s" % (exc.lineno, exc.msg)}
    return {"ok": True}


def do_analyze(req):
    try:
        functions, owner = analyze_source(req["source"])
    except SyntaxError as exc:
        return {"ok": False, "error": "line %s: %s" % (exc.lineno, exc.msg)}
    return {"ok": True, "functions": functions}


MODES = {
    "parse": do_parse,
    "analyze": do_analyze,
    "tests": do_tests,
    "trace": do_trace,
    "grade": do_grade,
    "snapshot": do_snapshot,
}


def main():
    out_fd = os.dup(1)
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    sys.stdout = open(os.devnull, "w")
    request = json.loads(sys.stdin.read())
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 3000))
    try:
        response = MODES[request["mode"]](request)
    except SyntaxError as exc:
        response = {"ok": False, "error": "line %s: %s" % (exc.lineno, exc.msg)}
    except Exception as exc:  # noqa: BLE001
        response = {"ok": False, "error": type(exc).__name__ + ": " + str(exc)}
    data = json.dumps(response).encode()
    view = memoryview(data)
    while view:
        n = os.write(out_fd, view)
        view = view[n:]
    os.close(out_fd)


main()
