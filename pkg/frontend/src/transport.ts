// Minimal socket abstraction so the client runs in the browser (native
// WebSocket), in node tests (the `ws` package), or against a fake.

export interface Socket {
  send(data: string): void;
  close(): void;
  onMessage(handler: (data: string) => void): void;
  onClose(handler: () => void): void;
  onOpen(handler: () => void): void;
  onError(handler: (err: unknown) => void): void;
}

export type SocketFactory = (url: string) => Socket | Promise<Socket>;

interface WebSocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, handler: (ev: any) => void): void;
}

function wrap(ws: WebSocketLike): Socket {
  return {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onMessage: (handler) =>
      ws.addEventListener('message', (ev: { data: unknown }) => handler(String(ev.data))),
    onClose: (handler) => ws.addEventListener('close', () => handler()),
    onOpen: (handler) => ws.addEventListener('open', () => handler()),
    onError: (handler) => ws.addEventListener('error', (ev: unknown) => handler(ev)),
  };
}

// Browser WebSocket, or the `ws` package when running under node.
export async function defaultSocketFactory(url: string): Promise<Socket> {
  const globalWs = (globalThis as any).WebSocket;
  if (typeof globalWs === 'function') {
    return wrap(new globalWs(url));
  }
  const mod = await import('ws');
  return wrap(new mod.default(url) as unknown as WebSocketLike);
}

export function wsUrl(serverUrl: string): string {
  const base = serverUrl.replace(/\/+$/, '');
  return base.replace(/^http/, 'ws') + '/ws';
}
