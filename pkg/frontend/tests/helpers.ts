export async function waitFor(check: () => boolean, timeoutMs = 2000, label = 'condition'): Promise<number> {
  const started = Date.now();
  for (;;) {
    if (check()) return Date.now() - started;
    if (Date.now() - started > timeoutMs) throw new Error(`${label} not met within ${timeoutMs}ms`);
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}

export function container(): HTMLElement {
  const node = document.createElement('div');
  document.body.append(node);
  return node;
}
