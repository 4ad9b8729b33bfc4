import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    environmentOptions: {
      happyDOM: {
        // tests talk to a local recorded mock server on an ephemeral port
        settings: { fetch: { disableSameOriginPolicy: true } },
      },
    },
    include: ['tests/**/*.test.ts'],
    testTimeout: 10000,
    hookTimeout: 10000,
  },
});
