// Optional speech input via the browser's native recognition API.
// Feature-detected: when the API is missing the mic control should simply
// not exist. Recognized text lands in the input buffer for the operator to
// confirm; it is never sent automatically.

export interface SpeechHost {
  SpeechRecognition?: new () => SpeechRecognizer;
  webkitSpeechRecognition?: new () => SpeechRecognizer;
}

export interface SpeechRecognizer {
  lang: string;
  continuous: boolean;
  interimResults: boolean;
  maxAlternatives: number;
  onresult: ((event: SpeechResultEvent) => void) | null;
  onerror: ((event: unknown) => void) | null;
  start(): void;
  stop(): void;
}

export interface SpeechResultEvent {
  results: ArrayLike<ArrayLike<{ transcript: string }>>;
}

export class SpeechInput {
  readonly supported: boolean;
  private recognizer: SpeechRecognizer | null = null;
  private onText: ((text: string) => void) | null = null;

  constructor(host: SpeechHost, lang = "en-US") {
    const Ctor = host.SpeechRecognition ?? host.webkitSpeechRecognition;
    this.supported = Boolean(Ctor);
    if (!Ctor) return;
    const rec = new Ctor();
    rec.lang = lang;
    rec.continuous = false;
    rec.interimResults = false;
    rec.maxAlternatives = 1;
    rec.onresult = (event) => {
      const transcript = event.results?.[0]?.[0]?.transcript ?? "";
      if (transcript && this.onText) this.onText(transcript);
    };
    // recognition errors leave the input untouched; nothing to do
    rec.onerror = () => undefined;
    this.recognizer = rec;
  }

  onTranscript(fn: (text: string) => void): void {
    this.onText = fn;
  }

  start(): void {
    try {
      this.recognizer?.start();
    } catch {
      // double-start raises in some engines; ignore
    }
  }

  stop(): void {
    try {
      this.recognizer?.stop();
    } catch {
      // ignore
    }
  }
}
