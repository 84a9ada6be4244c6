#!/usr/bin/env node
// Default solver adapter: reads one SMT-LIB2 script on stdin, evaluates it
// with the z3-solver WebAssembly build, and writes the solver's answer
// lines (sat/unsat/unknown, eval results) to stdout. Installed globally via
// `npm install -g z3-solver`; global roots are appended to the module path
// because this file lives inside a Python package, not a node project.
'use strict';

for (const p of ['/usr/local/lib/node_modules', '/usr/lib/node_modules']) {
  if (!module.paths.includes(p)) module.paths.push(p);
}

let data = '';
process.stdin.on('data', (c) => { data += c; });
process.stdin.on('end', async () => {
  let init;
  try {
    ({ init } = require('z3-solver'));
  } catch (e) {
    process.stderr.write('z3-solver not found; run: npm install -g z3-solver\n');
    process.exit(4);
  }
  try {
    const { Z3 } = await init();
    const cfg = Z3.mk_config();
    const ctx = Z3.mk_context(cfg);
    const out = await Z3.eval_smtlib2_string(ctx, data);
    process.stdout.write(out.endsWith('\n') ? out : out + '\n');
    // the wasm runtime keeps worker threads alive; exit explicitly
    process.exit(0);
  } catch (e) {
    process.stderr.write(String(e && e.message ? e.message : e) + '\n');
    process.exit(5);
  }
});
