// Socket plumbing, shaped like every other little ws client: connect,
// hand lines to a callback, reconnect with capped backoff.

export interface Client {
  send(text: string): void;
  close(): void;
}

export function connect(
  url: string,
  onLine: (line: string) => void,
  onStatus: (open: boolean) => void
): Client {
  let ws: WebSocket | null = null;
  let closed = false;
  let retryMs = 500;

  const open = () => {
    ws = new WebSocket(url);
    ws.onopen = () => {
      retryMs = 500;
      onStatus(true);
    };
    ws.onmessage = (ev) => {
      for (const line of String(ev.data).split("\n")) {
        if (line.trim()) onLine(line);
      }
    };
    ws.onclose = () => {
      onStatus(false);
      if (!closed) {
        setTimeout(open, retryMs);
        retryMs = Math.min(retryMs * 2, 8000);
      }
    };
    ws.onerror = () => {
      // onclose handles the retry
    };
  };
  open();

  return {
    send(text: string) {
      if (ws && ws.readyState === WebSocket.OPEN) ws.send(text);
    },
    close() {
      closed = true;
      ws?.close();
    },
  };
}
