#!/usr/bin/env python3
"""Minimal runtime shim for the harness's subprocess contract.

run-test      --module M --test-file T --repeat N --timeout S [--coverage-out C]
capture-call  --module M --call EXPR --blob-out B --timeout S

Each run executes in a fresh interpreter. Results go to stdout as JSON.
"""
import argparse
import ast
import io
import json
import os
import pickle
import subprocess
import sys
import time
import traceback


def module_name(path):
    rel = os.path.relpath(os.path.abspath(path), os.getcwd())
    rel = rel[:-3] if rel.endswith(".py") else rel
    parts = rel.split(os.sep)
    if parts[-1] == "__init__":
        parts.pop()
    return ".".join(parts)


def executable_lines(code):
    lines = set()
    stack = [code]
    while stack:
        c = stack.pop()
        for _, _, line in c.co_lines():
            if line is not None:
                lines.add(line)
        stack.extend(k for k in c.co_consts if hasattr(k, "co_lines"))
    return lines


def outcome(status, exc=None, out="", err="", wall=0.0):
    return {"status": status, "exception_type": exc, "stdout": out, "stderr": err, "wall_time": wall}


def classify(exc):
    if isinstance(exc, AssertionError):
        return outcome("assertion_error", "AssertionError")
    return outcome("other_error", type(exc).__name__)


# ---- child side ---------------------------------------------------------------


def child_test(args):
    module_file = os.path.abspath(args.module)
    covered = set()

    def tracer(frame, event, arg):
        if frame.f_code.co_filename == module_file:
            if event in ("call", "line"):
                covered.add(frame.f_lineno)
            return tracer
        return None

    buf_out, buf_err = io.StringIO(), io.StringIO()
    real_out = sys.stdout
    sys.stdout, sys.stderr = buf_out, buf_err
    result = outcome("pass")
    try:
        if args.coverage_out:
            sys.settrace(tracer)
        namespace = {"__name__": "depbench_test"}
        with open(args.test_file) as f:
            exec(compile(f.read(), args.test_file, "exec"), namespace)
        for name, fn in list(namespace.items()):
            if name.startswith("test_") and callable(fn):
                fn()
    except BaseException as e:  # noqa: B902
        result = classify(e)
        traceback.print_exc(file=buf_err)
    finally:
        sys.settrace(None)
        sys.stdout, sys.stderr = real_out, sys.__stderr__
    result["stdout"], result["stderr"] = buf_out.getvalue(), buf_err.getvalue()
    if args.coverage_out:
        with open(module_file) as f:
            lines = executable_lines(compile(f.read(), module_file, "exec"))
        report = {"file": module_file, "executable_lines": sorted(lines), "covered_lines": sorted(covered & lines)}
        with open(args.coverage_out, "w") as f:
            json.dump(report, f)
    print(json.dumps(result))


SIMPLE = (int, float, str, bytes, bool, type(None))


def literal_of(value):
    def simple(v):
        if isinstance(v, SIMPLE):
            return not (isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))))
        if isinstance(v, (list, tuple, set, frozenset)):
            return type(v) in (list, tuple, set) and all(simple(x) for x in v)
        if type(v) is dict:
            return all(simple(k) and simple(x) for k, x in v.items())
        return False

    if not simple(value):
        return None
    text = repr(value)
    try:
        return text if ast.literal_eval(text) == value else None
    except (ValueError, SyntaxError):
        return None


def child_capture(args):
    buf_out, buf_err = io.StringIO(), io.StringIO()
    real_out = sys.stdout
    sys.stdout, sys.stderr = buf_out, buf_err
    result = outcome("pass")
    literal = blob = None
    try:
        namespace = {}
        exec("from %s import *" % module_name(args.module), namespace)
        top = args.call.split("(", 1)[0].split(".", 1)[0].strip()
        if top and top not in namespace:
            exec("from %s import %s" % (module_name(args.module), top), namespace)
        value = eval(args.call, namespace)
        with open(args.blob_out, "wb") as f:
            pickle.dump(value, f)
        blob = args.blob_out
        literal = literal_of(value)
    except BaseException as e:  # noqa: B902
        result = classify(e)
        traceback.print_exc(file=buf_err)
    finally:
        sys.stdout, sys.stderr = real_out, sys.__stderr__
    result["stdout"], result["stderr"] = buf_out.getvalue(), buf_err.getvalue()
    result["literal"], result["value_blob"] = literal, blob
    print(json.dumps(result))


# ---- parent side ----------------------------------------------------------------


def spawn(argv, timeout):
    start = time.monotonic()
    try:
        p = subprocess.run([sys.executable, os.path.abspath(__file__)] + argv, capture_output=True, text=True,
                           timeout=timeout)
    except subprocess.TimeoutExpired:
        return outcome("timeout", wall=time.monotonic() - start)
    wall = time.monotonic() - start
    try:
        result = json.loads(p.stdout.strip().splitlines()[-1])
    except (ValueError, IndexError):
        result = outcome("other_error", "ShimError", "", p.stderr)
    result["wall_time"] = wall
    return result


def run_test(args):
    results = []
    for i in range(args.repeat):
        argv = ["_child-test", "--module", args.module, "--test-file", args.test_file]
        if args.coverage_out and i == args.repeat - 1:
            argv += ["--coverage-out", args.coverage_out]
        results.append(spawn(argv, args.timeout))
    print(json.dumps(results))


def capture_call(args):
    argv = ["_child-capture", "--module", args.module, "--call", args.call, "--blob-out", args.blob_out]
    result = spawn(argv, args.timeout)
    result.setdefault("literal", None)
    result.setdefault("value_blob", None)
    print(json.dumps(result))


def main():
    ap = argparse.ArgumentParser()
    sub = ap.add_subparsers(dest="cmd", required=True)
    t = sub.add_parser("run-test")
    t.add_argument("--module", required=True)
    t.add_argument("--test-file", required=True)
    t.add_argument("--repeat", type=int, default=1)
    t.add_argument("--timeout", type=float, default=30)
    t.add_argument("--coverage-out")
    c = sub.add_parser("capture-call")
    c.add_argument("--module", required=True)
    c.add_argument("--call", required=True)
    c.add_argument("--blob-out", required=True)
    c.add_argument("--timeout", type=float, default=30)
    ct = sub.add_parser("_child-test")
    ct.add_argument("--module", required=True)
    ct.add_argument("--test-file", required=True)
    ct.add_argument("--coverage-out")
    cc = sub.add_parser("_child-capture")
    cc.add_argument("--module", required=True)
    cc.add_argument("--call", required=True)
    cc.add_argument("--blob-out", required=True)
    args = ap.parse_args()
    {"run-test": run_test, "capture-call": capture_call, "_child-test": child_test,
     "_child-capture": child_capture}[args.cmd](args)


if __name__ == "__main__":
    main()
